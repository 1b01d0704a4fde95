#pragma once

#include <vector>

#include "ijdi/common.hpp"

namespace ijdi {

// One questionnaire answer: group FPRs z1 and z2 shown to the respondent and
// their equal-FPR indifference point z3, all integer percentages.
struct ElicitationResponse {
  int z1 = 0;
  int z2 = 0;
  int z3 = 0;
};

struct ValidationResult {
  bool ok = false;       // false means flagged for re-answer
  double x = 0.0;        // |z1 - z2|: the disparity shown
  double y = 0.0;        // z3 - (z1 + z2)/2: the accepted overall increase
};

// Range/parity violations throw DomainError; an inconsistent preference
// (z3 below the shown average) comes back with ok = false.
ValidationResult validate(const ElicitationResponse& resp);

// cost(disparity) / cost(error) from one validated response:
// (4 z3 - 2 z1 - 2 z2) / |z1 - z2|.
double cost_ratio_single(const ElicitationResponse& resp);

// Through-origin least squares over all validated responses: 4 sum(xy) / sum(x^2).
double cost_ratio_regression(const std::vector<ElicitationResponse>& responses);

}  // namespace ijdi
