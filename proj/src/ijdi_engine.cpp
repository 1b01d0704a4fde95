#include "ijdi/ijdi_engine.hpp"

#include <algorithm>
#include <cmath>

namespace ijdi {

namespace {
constexpr double kTriggerEps = 1e-12;
}

void CostProfile::validate() const {
  if (!(cost_fp > 0.0) || !(cost_fn > 0.0) || !(cost_dfpr > 0.0) || !(cost_dtpr > 0.0))
    throw DomainError("cost profile entries must be strictly positive");
}

double lambda_from_costs(const CostProfile& costs, Side side) {
  costs.validate();
  const double denom = side == Side::Negative ? costs.cost_dfpr : costs.cost_dtpr;
  return (costs.cost_fp + costs.cost_fn) / denom;
}

CriterionResult criterion_holds(const AuditFrame& frame, const Subgroup& subgroup, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const GroupStats s = group_stats(frame, subgroup);
  CriterionResult r;
  if (s.p_in > s.p_out) {
    r.base_rate_gap_positive = true;
    r.margin = lambda * (s.p_in - s.p_out) - (s.rate_in - s.rate_out);
  } else {
    r.base_rate_gap_positive = false;
    r.margin = s.rate_out - s.rate_in;
  }
  r.holds = r.margin >= 0.0;
  return r;
}

bool equivalence_check(const AuditFrame& frame, const Subgroup& subgroup, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const std::vector<std::uint8_t> member = membership(subgroup, frame);
  const std::size_t n = frame.size();
  std::size_t n_in = 0;
  CompensatedSum dev_y, dev_p;
  for (std::size_t k = 0; k < n; ++k) {
    if (!member[k]) continue;
    ++n_in;
    dev_y.add(static_cast<double>(frame.y_scan[k]) - frame.p_bar_b);
    dev_p.add(frame.p[k] - frame.p_bar);
  }
  if (n_in == 0) throw DomainError("degenerate subgroup: empty within the frame");
  const std::size_t n_out = n - n_in;
  if (n_out == 0) return true;  // whole frame: both forms read 0 <= 0

  const GroupStats s = group_stats(frame, member);
  bool group_verdict, sum_verdict;
  double group_margin;
  if (s.p_in > s.p_out) {
    group_margin = lambda * (s.p_in - s.p_out) - (s.rate_in - s.rate_out);
    group_verdict = group_margin >= 0.0;
    sum_verdict = dev_y.value() <= lambda * dev_p.value();
  } else {
    group_margin = s.rate_out - s.rate_in;
    group_verdict = group_margin >= 0.0;
    sum_verdict = dev_y.value() <= 0.0;
  }
  if (group_verdict != sum_verdict && std::abs(group_margin) > 1e-9) {
    throw InternalError("criterion forms disagree for subgroup " + subgroup.describe() +
                        " (margin " + std::to_string(group_margin) + ")");
  }
  return group_verdict;
}

double edge_case_1_adjust(AuditFrame& frame, std::span<const std::uint8_t> member) {
  const GroupStats s = group_stats(frame, member);
  if (!(s.p_in < s.p_out))
    throw DomainError("base-rate alignment requires p(S) < p(~S)");
  const double target = s.p_out;
  CompensatedSum total_gap, below_gap;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (!member[k]) continue;
    total_gap.add(target - frame.p[k]);
    if (frame.p[k] < target) below_gap.add(target - frame.p[k]);
  }
  const double alpha = total_gap.value() / below_gap.value();
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (!member[k] || !(frame.p[k] < target)) continue;
    frame.p[k] += alpha * (target - frame.p[k]);
    // refresh the scan expectation from the raised base rate; the frame
    // means stay frozen so every coordinate moves monotonically upward
    const double u = frame.p_bar_b + frame.lambda * (frame.p[k] - frame.p_bar);
    if (u > frame.p_scan_uncensored[k]) {
      frame.p_scan_uncensored[k] = u;
      frame.p_scan_censored[k] = std::clamp(u, 0.0, 1.0);
    }
  }
  return alpha;
}

double edge_case_1_adjust(AuditFrame& frame, const Subgroup& subgroup) {
  return edge_case_1_adjust(frame, membership(subgroup, frame));
}

double edge_case_2_adjust(AuditFrame& frame, std::span<const std::uint8_t> member) {
  if (member.size() != frame.size()) throw SchemaError("membership length mismatch");
  CompensatedSum unc_sum, cen_sum;
  std::size_t n_in = 0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (!member[k]) continue;
    ++n_in;
    unc_sum.add(frame.p_scan_uncensored[k]);
    cen_sum.add(frame.p_scan_censored[k]);
  }
  if (n_in == 0) throw DomainError("degenerate subgroup: empty within the frame");
  const double e_unc = unc_sum.value() / static_cast<double>(n_in);
  const double e_cen = cen_sum.value() / static_cast<double>(n_in);
  if (!(e_cen < e_unc))
    throw DomainError("censor-mean restore requires E[censored] < E[uncensored]");

  if (e_unc >= 1.0) {
    for (std::size_t k = 0; k < frame.size(); ++k) {
      if (!member[k] || !(frame.p_scan_uncensored[k] < 1.0)) continue;
      frame.p_scan_uncensored[k] = 1.0;
      frame.p_scan_censored[k] = 1.0;
    }
    return 1.0;
  }
  CompensatedSum excess, deficit;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (!member[k]) continue;
    const double u = frame.p_scan_uncensored[k];
    if (u >= 1.0) {
      excess.add(u - 1.0);
    } else {
      deficit.add(1.0 - u);
    }
  }
  const double beta = excess.value() / deficit.value();
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (!member[k]) continue;
    double& u = frame.p_scan_uncensored[k];
    if (u < 1.0) {
      u += beta * (1.0 - u);
      frame.p_scan_censored[k] = std::clamp(u, 0.0, 1.0);
    }
  }
  return beta;
}

double edge_case_2_adjust(AuditFrame& frame, const Subgroup& subgroup) {
  return edge_case_2_adjust(frame, membership(subgroup, frame));
}

const char* adjustment_kind_name(Adjustment::Kind kind) {
  switch (kind) {
    case Adjustment::Kind::BaseRateAlignment:
      return "base_rate_alignment";
    case Adjustment::Kind::CensorMeanSetOne:
      return "censor_mean_set_one";
    case Adjustment::Kind::CensorMeanBlend:
      return "censor_mean_blend";
  }
  return "unknown";
}

IjdiResult ijdi_scan_frame(const AuditFrame& original, const IjdiConfig& config) {
  config.scan.validate();
  if (config.max_adjust_iters <= 0) throw DomainError("max_adjust_iters must be positive");
  AuditFrame work = original;  // private mutable copy of (p, p_scan)

  IjdiResult result;
  for (int iter = 1; iter <= config.max_adjust_iters; ++iter) {
    const ScanResult sr = scan(work, config.scan);
    result.subgroup = sr.subgroup;
    result.f = sr.f;
    result.q = sr.q;
    result.q_unbounded = sr.q_unbounded;
    result.member_count = sr.member_count;
    if (!(sr.f > 0.0)) return result;  // nothing detected, nothing to correct

    const std::vector<std::uint8_t> member = mask_membership(work, sr.mask);
    std::size_t n_in = 0;
    CompensatedSum p_in_sum, p_out_sum, unc_sum, cen_sum;
    std::size_t n_below_one = 0;
    for (std::size_t k = 0; k < work.size(); ++k) {
      if (member[k]) {
        ++n_in;
        p_in_sum.add(work.p[k]);
        unc_sum.add(work.p_scan_uncensored[k]);
        cen_sum.add(work.p_scan_censored[k]);
        if (work.p_scan_uncensored[k] < 1.0) ++n_below_one;
      } else {
        p_out_sum.add(work.p[k]);
      }
    }
    const std::size_t n_out = work.size() - n_in;
    const double p_in = p_in_sum.value() / static_cast<double>(n_in);
    const double e_unc = unc_sum.value() / static_cast<double>(n_in);
    const double e_cen = cen_sum.value() / static_cast<double>(n_in);

    if (n_out > 0) {
      const double p_out = p_out_sum.value() / static_cast<double>(n_out);
      if (p_out - p_in > kTriggerEps) {
        Adjustment adj;
        adj.iteration = iter;
        adj.kind = Adjustment::Kind::BaseRateAlignment;
        adj.subgroup = sr.subgroup;
        adj.mean_before = p_in;
        adj.coefficient = edge_case_1_adjust(work, member);
        CompensatedSum after;
        for (std::size_t k = 0; k < work.size(); ++k) {
          if (member[k]) after.add(work.p[k]);
        }
        adj.mean_after = after.value() / static_cast<double>(n_in);
        result.adjustments.push_back(std::move(adj));
        continue;
      }
    }
    if (e_unc - e_cen > kTriggerEps && n_below_one > 0) {
      Adjustment adj;
      adj.iteration = iter;
      adj.subgroup = sr.subgroup;
      adj.mean_before = e_cen;
      adj.kind = e_unc >= 1.0 ? Adjustment::Kind::CensorMeanSetOne
                              : Adjustment::Kind::CensorMeanBlend;
      adj.coefficient = edge_case_2_adjust(work, member);
      CompensatedSum after;
      for (std::size_t k = 0; k < work.size(); ++k) {
        if (member[k]) after.add(work.p_scan_censored[k]);
      }
      adj.mean_after = after.value() / static_cast<double>(n_in);
      result.adjustments.push_back(std::move(adj));
      continue;
    }
    return result;  // no correction applies
  }
  throw DomainError("correction loop did not settle within " +
                    std::to_string(config.max_adjust_iters) + " iterations");
}

IjdiResult ijdi_scan(const AuditTable& table, double lambda, Side side, const IjdiConfig& config) {
  return ijdi_scan_frame(build_frame(table, side, lambda), config);
}

}  // namespace ijdi
