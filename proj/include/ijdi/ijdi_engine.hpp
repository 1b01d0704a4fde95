#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ijdi/data_model.hpp"
#include "ijdi/scan_core.hpp"

namespace ijdi {

// Utility costs that determine how much error-rate disparity a base-rate gap
// justifies. All strictly positive, in a common unit.
struct CostProfile {
  double cost_fp = 1.0;
  double cost_fn = 1.0;
  double cost_dfpr = 1.0;  // cost of one unit of FPR disparity
  double cost_dtpr = 1.0;  // cost of one unit of TPR disparity

  void validate() const;
};

// lambda = (cost_fp + cost_fn) / cost_d{fpr,tpr} for the requested side.
double lambda_from_costs(const CostProfile& costs, Side side);

struct CriterionResult {
  bool holds = false;
  double margin = 0.0;  // allowed minus actual disparity; >= 0 iff holds
  bool base_rate_gap_positive = false;  // which clause applied
};

// Group-difference form of the fairness criterion. Requires a non-degenerate
// subgroup (both sides non-empty in the frame).
CriterionResult criterion_holds(const AuditFrame& frame, const Subgroup& subgroup, double lambda);

// Cross-checks the group-difference form against the per-record-sum form;
// throws InternalError if they disagree beyond tolerance, else returns the
// shared verdict. The full-frame subgroup trivially holds (0 <= 0).
bool equivalence_check(const AuditFrame& frame, const Subgroup& subgroup, double lambda);

// Raises member base rates below p(~S) so that p(S) = p(~S), preserving
// their relative order; refreshes the members' scan expectations. Requires
// p(S) < p(~S). Returns the applied blend coefficient.
double edge_case_1_adjust(AuditFrame& frame, const Subgroup& subgroup);
double edge_case_1_adjust(AuditFrame& frame, std::span<const std::uint8_t> member);

// Restores the member mean of the censored scan expectations to the prior
// uncensored mean by raising below-1 entries (or pinning them to 1 when the
// uncensored mean already reaches 1). Requires E[censored] < E[uncensored].
// Returns the applied beta (1.0 for the pin-to-one branch).
double edge_case_2_adjust(AuditFrame& frame, const Subgroup& subgroup);
double edge_case_2_adjust(AuditFrame& frame, std::span<const std::uint8_t> member);

struct Adjustment {
  enum class Kind { BaseRateAlignment, CensorMeanSetOne, CensorMeanBlend };
  int iteration = 0;  // 1-based scan iteration that triggered the correction
  Kind kind = Kind::BaseRateAlignment;
  Subgroup subgroup;
  double coefficient = 0.0;   // alpha or beta (1 for the set-to-one branch)
  double mean_before = 0.0;   // p(S) for base-rate alignment, E[censored] otherwise
  double mean_after = 0.0;
};

const char* adjustment_kind_name(Adjustment::Kind kind);

struct IjdiConfig {
  ScanConfig scan;
  int max_adjust_iters = 100;  // backstop on the correction loop
};

struct IjdiResult {
  Subgroup subgroup;
  double f = 0.0;
  double q = 1.0;
  bool q_unbounded = false;
  std::size_t member_count = 0;
  std::vector<Adjustment> adjustments;
  std::optional<double> p_value;  // filled by the significance layer
};

// The outer audit loop: scan, correct the detected subgroup's edge cases,
// rescan until clean. With lambda = 0 this reduces exactly to the plain
// FPR-/TPR-Scan on the requested side.
IjdiResult ijdi_scan(const AuditTable& table, double lambda, Side side, const IjdiConfig& config);

// Same loop on a caller-built frame (the frame is copied internally).
IjdiResult ijdi_scan_frame(const AuditFrame& frame, const IjdiConfig& config);

}  // namespace ijdi
