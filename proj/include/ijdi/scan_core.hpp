#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ijdi/data_model.hpp"

namespace ijdi {

// Log-likelihood-ratio score of a row set, with the fitted risk factor.
// `q_unbounded` marks the supremum-at-infinity case (every expected-positive
// row observed positive); `f` then carries the analytic limit, with rows at
// p_scan = 0 capped at log(q_max).
struct ScoreValue {
  double f = 0.0;
  double q = 1.0;
  bool q_unbounded = false;
};

struct ScanConfig {
  int restarts = 50;
  int max_sweeps = 50;
  double q_max = 1e6;
  double tol = 1e-9;  // absolute score improvement per sweep
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-attribute inclusion bitmask (bit v set = value v included).
struct SubgroupMask {
  std::vector<std::uint64_t> included;

  bool operator==(const SubgroupMask& o) const { return included == o.included; }
};

SubgroupMask full_mask(const Schema& schema);
SubgroupMask subgroup_to_mask(const Subgroup& sg, const Schema& schema);
Subgroup mask_to_subgroup(const SubgroupMask& mask, const Schema& schema);

// Frame-local membership under a mask.
std::vector<std::uint8_t> mask_membership(const AuditFrame& frame, const SubgroupMask& mask);

struct ScanResult {
  Subgroup subgroup;
  SubgroupMask mask;
  double f = 0.0;
  double q = 1.0;
  bool q_unbounded = false;
  std::size_t member_count = 0;
};

// Maximizes sum_i [y_i log q - log(1 - p_i + q p_i)] over q >= 1.
ScoreValue score(std::span<const std::uint8_t> y_scan, std::span<const double> p_scan,
                 double q_max = 1e6);

// Root of sum y_i / q = sum p_i / (1 - p_i + q p_i) on [1, q_max]; returns 1
// when observed <= expected and q_max when the objective increases without
// bound.
double mle_q(std::span<const std::uint8_t> y_scan, std::span<const double> p_scan,
             double q_max = 1e6);

// Replaces the value set of one attribute with the best-scoring non-empty
// subset, conditional on the other attributes (alternating q-fit and
// positive-contribution selection). Never decreases the score.
Subgroup optimize_attribute(const AuditFrame& frame, const Subgroup& current,
                            const std::string& attribute, const ScanConfig& config);
SubgroupMask optimize_attribute_mask(const AuditFrame& frame, SubgroupMask current,
                                     std::size_t attribute, const ScanConfig& config);

// One coordinate-ascent pass from a random start; deterministic per seed.
ScanResult ascend(const AuditFrame& frame, const ScanConfig& config, std::uint64_t seed);

// Best of `config.restarts` ascents. Ties go to fewer member rows, then the
// lexicographically smallest description.
ScanResult scan(const AuditFrame& frame, const ScanConfig& config);

// Exact enumeration oracle; refuses when the subgroup count exceeds `budget`.
ScanResult brute_force_scan(const AuditFrame& frame, std::uint64_t budget = 1000000,
                            double q_max = 1e6);

// Number of candidate subgroups, saturated at 2^63 to avoid overflow.
std::uint64_t subgroup_count(const Schema& schema);

}  // namespace ijdi
