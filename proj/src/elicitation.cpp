#include "ijdi/elicitation.hpp"

#include <cmath>
#include <cstdlib>

namespace ijdi {

ValidationResult validate(const ElicitationResponse& resp) {
  const auto in_range = [](int z) { return z >= 0 && z <= 100; };
  if (!in_range(resp.z1) || !in_range(resp.z2) || !in_range(resp.z3))
    throw DomainError("elicitation answers must lie in [0,100]");
  if (resp.z1 == resp.z2) throw DomainError("z1 and z2 must differ");
  if ((resp.z1 + resp.z2) % 2 != 0) throw DomainError("z1 + z2 must be even");
  ValidationResult r;
  r.x = std::abs(resp.z1 - resp.z2);
  r.y = static_cast<double>(resp.z3) - static_cast<double>(resp.z1 + resp.z2) / 2.0;
  r.ok = r.y >= 0.0;  // z3 below the average FPR flags an inconsistent answer
  return r;
}

double cost_ratio_single(const ElicitationResponse& resp) {
  const ValidationResult v = validate(resp);
  if (!v.ok)
    throw DomainError("inconsistent response (z3 below the shown average); re-ask the question");
  return (4.0 * resp.z3 - 2.0 * resp.z1 - 2.0 * resp.z2) / std::abs(resp.z1 - resp.z2);
}

double cost_ratio_regression(const std::vector<ElicitationResponse>& responses) {
  if (responses.empty()) throw DomainError("no elicitation responses");
  CompensatedSum xy, xx;
  for (const ElicitationResponse& r : responses) {
    const ValidationResult v = validate(r);
    if (!v.ok)
      throw DomainError("inconsistent response (z3 below the shown average); re-ask the question");
    xy.add(v.x * v.y);
    xx.add(v.x * v.x);
  }
  return 4.0 * xy.value() / xx.value();
}

}  // namespace ijdi
