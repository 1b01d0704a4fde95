#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ijdi/ijdi_engine.hpp"
#include "ijdi/significance.hpp"

namespace ijdi {

// Group-dependent threshold assignment; overrides apply in order, so the last
// matching entry wins on overlapping subgroups.
struct ThresholdPolicy {
  double default_threshold = 0.5;
  std::vector<std::pair<Subgroup, double>> overrides;

  void validate(const Schema& schema) const;
};

// Returns the table with per-record thresholds set by the policy and
// recommendations re-binarized.
AuditTable apply_policy(const AuditTable& table, const ThresholdPolicy& policy);

struct ErrorRateReport {
  double fpr_in = 0.0, fpr_out = 0.0;  // on the negative frame
  double tpr_in = 0.0, tpr_out = 0.0;  // on the positive frame
};

ErrorRateReport error_rate_report(const AuditTable& table, const Subgroup& subgroup);

// The corrective threshold for a detected subgroup: the order-statistic
// quantile of the members' predictions at level 1 - (PR(~S) + lambda * (p(S)
// - p(~S))), clamped to [0,1]. At most that proportion of member predictions
// strictly exceed it.
double eta_threshold(const AuditTable& table, const Subgroup& subgroup, double lambda, Side side);

struct CorrectionStep {
  int iteration = 0;
  Subgroup subgroup;
  double eta = 0.0;
  double f_before = 0.0;
  Side side = Side::Negative;
  std::optional<double> p_value;
};

enum class CorrectionTermination { NoSubgroupFound, NotSignificant, MaxIterations };

const char* correction_termination_name(CorrectionTermination t);

struct CorrectionTrace {
  std::vector<CorrectionStep> steps;
  CorrectionTermination terminated = CorrectionTermination::NoSubgroupFound;
  std::optional<AuditTable> final_table;
};

// Repeatedly audits, assigns eta-thresholds to the detected subgroup, and
// re-binarizes, until the detected score drops below `score_floor` or (when
// sig is given) the detection is not significant.
CorrectionTrace iterative_correction(const AuditTable& table, double lambda, Side side,
                                     const IjdiConfig& config,
                                     const std::optional<SignificanceConfig>& sig, int max_iters,
                                     double score_floor = 1e-6);

// n thresholds drawn uniformly on [center - delta, center + delta];
// the interval must lie inside [0,1] and delta must be positive.
std::vector<double> randomize_thresholds(double theta_center, double delta, std::size_t n,
                                         std::uint64_t seed);

// Smallest lambda at which uniform threshold randomization of half-width
// delta rules out any insufficiently justified disparity: 1 / (2 delta).
double min_lambda_no_ijdi(double delta);

}  // namespace ijdi
