#include "ijdi/mitigation.hpp"

#include <algorithm>
#include <cmath>

namespace ijdi {

void ThresholdPolicy::validate(const Schema& schema) const {
  if (!(default_threshold >= 0.0 && default_threshold <= 1.0))
    throw DomainError("default threshold out of [0,1]");
  for (const auto& [sg, th] : overrides) {
    sg.validate(schema);
    if (!(th >= 0.0 && th <= 1.0)) throw DomainError("override threshold out of [0,1]");
  }
}

AuditTable apply_policy(const AuditTable& table, const ThresholdPolicy& policy) {
  policy.validate(table.schema());
  std::vector<double> theta(table.n_rows(), policy.default_threshold);
  for (const auto& [sg, th] : policy.overrides) {
    const std::vector<std::uint8_t> member = membership(sg, table);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (member[i]) theta[i] = th;
    }
  }
  return table.with_theta(std::move(theta));
}

ErrorRateReport error_rate_report(const AuditTable& table, const Subgroup& subgroup) {
  ErrorRateReport r;
  const AuditFrame neg = build_frame(table, Side::Negative, 0.0);
  const GroupStats sn = group_stats(neg, subgroup);
  r.fpr_in = sn.rate_in;
  r.fpr_out = sn.rate_out;
  const AuditFrame pos = build_frame(table, Side::Positive, 0.0);
  const GroupStats sp = group_stats(pos, subgroup);
  r.tpr_in = sp.rate_in;
  r.tpr_out = sp.rate_out;
  return r;
}

double eta_threshold(const AuditTable& table, const Subgroup& subgroup, double lambda, Side side) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const AuditFrame frame = build_frame(table, side, 0.0);
  const std::vector<std::uint8_t> member = membership(subgroup, frame);

  std::vector<double> member_predictions;
  CompensatedSum rate_out_sum, p_in_sum, p_out_sum;
  std::size_t n_out = 0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (member[k]) {
      member_predictions.push_back(table.p_hat0()[frame.rows[k]]);
      p_in_sum.add(frame.p[k]);
    } else {
      ++n_out;
      rate_out_sum.add(frame.y_scan[k]);
      p_out_sum.add(frame.p[k]);
    }
  }
  if (member_predictions.empty())
    throw DomainError("subgroup has no members in the requested frame");
  if (n_out == 0) throw DomainError("subgroup covers the whole frame");

  const double rate_out = rate_out_sum.value() / static_cast<double>(n_out);
  const double p_in = p_in_sum.value() / member_predictions.size();
  const double p_out = p_out_sum.value() / static_cast<double>(n_out);
  const double target = rate_out + lambda * (p_in - p_out);
  const double level = std::clamp(1.0 - target, 0.0, 1.0);

  std::sort(member_predictions.begin(), member_predictions.end());
  const std::size_t n = member_predictions.size();
  // ceil(level * n)-th ascending order statistic, 1-based; level 0 -> minimum
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(level * static_cast<double>(n) - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, n);
  return member_predictions[idx - 1];
}

const char* correction_termination_name(CorrectionTermination t) {
  switch (t) {
    case CorrectionTermination::NoSubgroupFound:
      return "no_subgroup_found";
    case CorrectionTermination::NotSignificant:
      return "not_significant";
    case CorrectionTermination::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

CorrectionTrace iterative_correction(const AuditTable& table, double lambda, Side side,
                                     const IjdiConfig& config,
                                     const std::optional<SignificanceConfig>& sig, int max_iters,
                                     double score_floor) {
  if (max_iters <= 0) throw DomainError("max_iters must be positive");
  CorrectionTrace trace;
  AuditTable work = table;
  trace.terminated = CorrectionTermination::MaxIterations;
  for (int iter = 1; iter <= max_iters; ++iter) {
    IjdiResult res;
    std::optional<double> pv;
    if (sig) {
      SignificanceConfig iter_sig = *sig;
      iter_sig.seed = derive_seed(sig->seed, static_cast<std::uint64_t>(iter));
      const PValueResult pr = p_value(work, lambda, side, config, iter_sig);
      res = pr.observed;
      pv = pr.p_value;
      if (res.f <= score_floor) {
        trace.terminated = CorrectionTermination::NoSubgroupFound;
        break;
      }
      if (!pr.significant) {
        trace.terminated = CorrectionTermination::NotSignificant;
        break;
      }
    } else {
      res = ijdi_scan(work, lambda, side, config);
      if (res.f <= score_floor) {
        trace.terminated = CorrectionTermination::NoSubgroupFound;
        break;
      }
    }

    const double eta = eta_threshold(work, res.subgroup, lambda, side);
    CorrectionStep step;
    step.iteration = iter;
    step.subgroup = res.subgroup;
    step.eta = eta;
    step.f_before = res.f;
    step.side = side;
    step.p_value = pv;
    trace.steps.push_back(std::move(step));

    std::vector<double> theta = work.theta();
    const std::vector<std::uint8_t> member = membership(res.subgroup, work);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (member[i]) theta[i] = eta;
    }
    work = work.with_theta(std::move(theta));
  }
  trace.final_table = std::move(work);
  return trace;
}

std::vector<double> randomize_thresholds(double theta_center, double delta, std::size_t n,
                                         std::uint64_t seed) {
  if (!(delta > 0.0 && delta <= 0.5)) throw DomainError("delta must lie in (0, 0.5]");
  if (!(theta_center - delta >= 0.0) || !(theta_center + delta <= 1.0))
    throw DomainError("threshold interval extends outside [0,1]");
  std::vector<double> out(n);
  Rng rng(seed);
  for (double& t : out) t = rng.uniform(theta_center - delta, theta_center + delta);
  return out;
}

double min_lambda_no_ijdi(double delta) {
  if (!(delta > 0.0 && delta <= 0.5)) throw DomainError("delta must lie in (0, 0.5]");
  return 1.0 / (2.0 * delta);
}

}  // namespace ijdi
