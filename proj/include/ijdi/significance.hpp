#pragma once

#include <vector>

#include "ijdi/ijdi_engine.hpp"

namespace ijdi {

struct SignificanceConfig {
  int replicates = 99;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// Copy of the table with each frame record's recommendation redrawn as
// Bernoulli(censored scan expectation) under the null, computed from the
// original, unadjusted base rates. Records outside the frame are unchanged.
AuditTable null_replicate(const AuditTable& table, double lambda, Side side, std::uint64_t seed);

struct PValueResult {
  IjdiResult observed;
  double p_value = 1.0;
  bool significant = false;
  std::vector<double> null_scores;  // one max score per replicate, in replicate order
};

// Randomization test: p = (1 + #{F_r >= F_obs}) / (R + 1); the significance
// flag compares F_obs against the empirical (1 - alpha) quantile of the null
// maxima. Replicates rerun the full correction loop with the same scan
// budget.
PValueResult p_value(const AuditTable& table, double lambda, Side side, const IjdiConfig& config,
                     const SignificanceConfig& sig);

}  // namespace ijdi
