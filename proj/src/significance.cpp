#include "ijdi/significance.hpp"

#include <algorithm>
#include <cmath>

namespace ijdi {

void SignificanceConfig::validate() const {
  if (replicates <= 0) throw DomainError("replicates must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
}

AuditTable null_replicate(const AuditTable& table, double lambda, Side side, std::uint64_t seed) {
  const AuditFrame frame = build_frame(table, side, lambda);
  std::vector<std::uint8_t> rec = table.recommendations();
  Rng rng(seed);
  for (std::size_t k = 0; k < frame.size(); ++k) {
    rec[frame.rows[k]] = rng.bernoulli(frame.p_scan_censored[k]) ? 1 : 0;
  }
  return table.with_recommendation_override(std::move(rec));
}

PValueResult p_value(const AuditTable& table, double lambda, Side side, const IjdiConfig& config,
                     const SignificanceConfig& sig) {
  sig.validate();
  PValueResult out;
  out.observed = ijdi_scan(table, lambda, side, config);

  out.null_scores.assign(static_cast<std::size_t>(sig.replicates), 0.0);
  parallel_for_index(out.null_scores.size(), [&](std::size_t r) {
    const AuditTable replicate = null_replicate(table, lambda, side, derive_seed(sig.seed, 2 * r));
    IjdiConfig rep_config = config;
    rep_config.scan.seed = derive_seed(sig.seed, 2 * r + 1);
    out.null_scores[r] = ijdi_scan(replicate, lambda, side, rep_config).f;
  });

  std::size_t at_least = 0;
  for (double f : out.null_scores) {
    if (f >= out.observed.f) ++at_least;
  }
  out.p_value =
      static_cast<double>(1 + at_least) / static_cast<double>(sig.replicates + 1);

  // empirical (1 - alpha) quantile: ceil((1 - alpha) * R)-th order statistic
  std::vector<double> sorted = out.null_scores;
  std::sort(sorted.begin(), sorted.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil((1.0 - sig.alpha) * static_cast<double>(sig.replicates)));
  idx = std::clamp<std::size_t>(idx, 1, sorted.size());
  out.significant = out.observed.f > sorted[idx - 1];
  out.observed.p_value = out.p_value;
  return out;
}

}  // namespace ijdi
