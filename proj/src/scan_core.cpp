#include "ijdi/scan_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ijdi {

void ScanConfig::validate() const {
  if (restarts <= 0) throw DomainError("restarts must be positive");
  if (max_sweeps <= 0) throw DomainError("max_sweeps must be positive");
  if (!(q_max > 1.0)) throw DomainError("q_max must exceed 1");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
}

SubgroupMask full_mask(const Schema& schema) {
  SubgroupMask m;
  m.included.resize(schema.n_attributes());
  for (std::size_t a = 0; a < schema.n_attributes(); ++a) {
    const std::size_t k = schema.attribute(a).values.size();
    m.included[a] = k == 64 ? ~0ULL : ((1ULL << k) - 1ULL);
  }
  return m;
}

SubgroupMask subgroup_to_mask(const Subgroup& sg, const Schema& schema) {
  sg.validate(schema);
  SubgroupMask m = full_mask(schema);
  for (const auto& [name, values] : sg.included) {
    const std::size_t a = schema.attribute_index(name);
    std::uint64_t bits = 0;
    for (const std::string& v : values) bits |= 1ULL << schema.value_code(a, v);
    m.included[a] = bits;
  }
  return m;
}

Subgroup mask_to_subgroup(const SubgroupMask& mask, const Schema& schema) {
  Subgroup sg;
  for (std::size_t a = 0; a < schema.n_attributes(); ++a) {
    const Attribute& attr = schema.attribute(a);
    const std::uint64_t full = attr.values.size() == 64 ? ~0ULL : ((1ULL << attr.values.size()) - 1ULL);
    if ((mask.included[a] & full) == full) continue;  // all values: omit
    std::set<std::string> vals;
    for (std::size_t v = 0; v < attr.values.size(); ++v) {
      if ((mask.included[a] >> v) & 1ULL) vals.insert(attr.values[v]);
    }
    if (vals.empty()) throw InternalError("mask with empty value set for '" + attr.name + "'");
    sg.included.emplace(attr.name, std::move(vals));
  }
  return sg;
}

std::vector<std::uint8_t> mask_membership(const AuditFrame& frame, const SubgroupMask& mask) {
  const std::size_t n = frame.size();
  std::vector<std::uint8_t> member(n, 1);
  for (std::size_t a = 0; a < frame.codes.size(); ++a) {
    const std::uint64_t bits = mask.included[a];
    const auto& col = frame.codes[a];
    for (std::size_t k = 0; k < n; ++k) {
      if (!((bits >> col[k]) & 1ULL)) member[k] = 0;
    }
  }
  return member;
}

namespace {

struct SumPair {
  double sum_y = 0.0;
  double sum_p = 0.0;
  std::size_t n = 0;
  std::size_t n_pos_p = 0;  // rows with p_scan > 0
};

SumPair base_sums(std::span<const std::uint8_t> y, std::span<const double> p) {
  SumPair s;
  CompensatedSum sy, sp;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sy.add(y[i]);
    sp.add(p[i]);
    if (p[i] > 0.0) ++s.n_pos_p;
  }
  s.sum_y = sy.value();
  s.sum_p = sp.value();
  s.n = y.size();
  return s;
}

// d/dq of the objective, multiplied by q: sum_y - sum_i q p_i / (1 - p_i + q p_i).
// Decreasing in q; 1 - p + q p >= 1 for q >= 1 so the terms are safe.
double derivative_stat(std::span<const double> p, double q,
                       double sum_y) {
  CompensatedSum t;
  for (double pi : p) {
    if (pi > 0.0) t.add(q * pi / (1.0 - pi + q * pi));
  }
  return sum_y - t.value();
}

double objective(std::span<const std::uint8_t> y, std::span<const double> p, double q) {
  const double lq = std::log(q);
  CompensatedSum f;
  for (std::size_t i = 0; i < y.size(); ++i) {
    f.add((y[i] ? lq : 0.0) - std::log1p(p[i] * (q - 1.0)));
  }
  return f.value();
}

double bisect_q(std::span<const double> p, double q_max, double sum_y) {
  if (derivative_stat(p, q_max, sum_y) >= 0.0) return q_max;
  double lo = 0.0, hi = std::log(q_max);  // log-space bracket: h(e^lo) > 0 >= h(e^hi)
  for (int it = 0; it < 90 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double q = std::exp(mid);
    const double h = derivative_stat(p, q, sum_y);
    if (std::abs(h / q) <= 1e-13) return q;
    if (h > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace

double mle_q(std::span<const std::uint8_t> y_scan, std::span<const double> p_scan, double q_max) {
  if (y_scan.empty()) throw DomainError("mle_q: empty input");
  if (y_scan.size() != p_scan.size()) throw SchemaError("mle_q: length mismatch");
  if (!(q_max > 1.0)) throw DomainError("mle_q: q_max must exceed 1");
  const SumPair s = base_sums(y_scan, p_scan);
  if (s.sum_y <= s.sum_p) return 1.0;            // observed <= expected
  if (s.sum_y >= static_cast<double>(s.n_pos_p)) return q_max;  // increasing for all q
  return bisect_q(p_scan, q_max, s.sum_y);
}

ScoreValue score(std::span<const std::uint8_t> y_scan, std::span<const double> p_scan,
                 double q_max) {
  if (y_scan.empty()) throw DomainError("score: empty input");
  if (y_scan.size() != p_scan.size()) throw SchemaError("score: length mismatch");
  if (!(q_max > 1.0)) throw DomainError("score: q_max must exceed 1");
  const SumPair s = base_sums(y_scan, p_scan);
  ScoreValue out;
  if (s.sum_y <= s.sum_p) return out;  // q = 1, F = 0
  if (s.sum_y >= static_cast<double>(s.n_pos_p)) {
    // Supremum as q -> infinity: (sum_y - #{p>0}) log(q) + sum_{p>0} log(1/p).
    // Surplus rows (y = 1 with p_scan = 0) are capped at log(q_max).
    CompensatedSum f;
    f.add((s.sum_y - static_cast<double>(s.n_pos_p)) * std::log(q_max));
    for (double pi : p_scan) {
      if (pi > 0.0) f.add(-std::log(pi));
    }
    out.f = std::max(0.0, f.value());
    out.q = q_max;
    out.q_unbounded = true;
    return out;
  }
  const double q = bisect_q(p_scan, q_max, s.sum_y);
  out.q = q;
  out.f = std::max(0.0, objective(y_scan, p_scan, q));
  return out;
}

namespace {

// Gathers member rows' (y, p_scan) under a mask and scores them.
struct MaskEvaluation {
  ScoreValue value;
  std::size_t member_count = 0;
};

MaskEvaluation evaluate_mask(const AuditFrame& frame, const SubgroupMask& mask, double q_max) {
  const std::vector<std::uint8_t> member = mask_membership(frame, mask);
  std::vector<std::uint8_t> y;
  std::vector<double> p;
  y.reserve(frame.size());
  p.reserve(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (member[k]) {
      y.push_back(frame.y_scan[k]);
      p.push_back(frame.p_scan_censored[k]);
    }
  }
  MaskEvaluation ev;
  ev.member_count = y.size();
  if (!y.empty()) ev.value = score(y, p, q_max);
  return ev;
}

// Candidate rows for one attribute: members with that attribute ignored.
std::vector<std::uint8_t> candidate_rows(const AuditFrame& frame, const SubgroupMask& mask,
                                         std::size_t skip_attr) {
  const std::size_t n = frame.size();
  std::vector<std::uint8_t> cand(n, 1);
  for (std::size_t a = 0; a < frame.codes.size(); ++a) {
    if (a == skip_attr) continue;
    const std::uint64_t bits = mask.included[a];
    const auto& col = frame.codes[a];
    for (std::size_t k = 0; k < n; ++k) {
      if (!((bits >> col[k]) & 1ULL)) cand[k] = 0;
    }
  }
  return cand;
}

bool result_better(const ScanResult& a, const ScanResult& b, const Schema& schema) {
  if (a.f != b.f) return a.f > b.f;
  if (a.member_count != b.member_count) return a.member_count < b.member_count;
  return mask_to_subgroup(a.mask, schema).describe() <
         mask_to_subgroup(b.mask, schema).describe();
}

ScanResult make_result(const AuditFrame& frame, const SubgroupMask& mask, double q_max) {
  const MaskEvaluation ev = evaluate_mask(frame, mask, q_max);
  ScanResult r;
  r.mask = mask;
  r.subgroup = mask_to_subgroup(mask, *frame.schema);
  r.f = ev.value.f;
  r.q = ev.value.q;
  r.q_unbounded = ev.value.q_unbounded;
  r.member_count = ev.member_count;
  return r;
}

}  // namespace

SubgroupMask optimize_attribute_mask(const AuditFrame& frame, SubgroupMask current,
                                     std::size_t attribute, const ScanConfig& config) {
  const std::size_t n = frame.size();
  const std::size_t n_values = frame.schema->attribute(attribute).values.size();
  const auto& col = frame.codes[attribute];
  const std::vector<std::uint8_t> cand = candidate_rows(frame, current, attribute);

  std::vector<std::uint8_t> y_members;
  std::vector<double> p_members;
  std::vector<double> contribution(n_values);

  for (int pass = 0; pass < 64; ++pass) {
    // (a) fit q on the current member rows
    y_members.clear();
    p_members.clear();
    const std::uint64_t bits = current.included[attribute];
    for (std::size_t k = 0; k < n; ++k) {
      if (cand[k] && ((bits >> col[k]) & 1ULL)) {
        y_members.push_back(frame.y_scan[k]);
        p_members.push_back(frame.p_scan_censored[k]);
      }
    }
    const double q =
        y_members.empty() ? 1.0 : mle_q(y_members, p_members, config.q_max);

    // (b) per-value aggregate contribution at fixed q. At q = 1 the exact
    // contribution vanishes identically, so use its first-order direction
    // sum(y - p) instead; the selected set is the one that scores positive
    // for q just above 1.
    std::fill(contribution.begin(), contribution.end(), 0.0);
    if (q > 1.0) {
      const double lq = std::log(q);
      for (std::size_t k = 0; k < n; ++k) {
        if (!cand[k]) continue;
        contribution[col[k]] +=
            (frame.y_scan[k] ? lq : 0.0) - std::log1p(frame.p_scan_censored[k] * (q - 1.0));
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        if (!cand[k]) continue;
        contribution[col[k]] += static_cast<double>(frame.y_scan[k]) - frame.p_scan_censored[k];
      }
    }

    std::uint64_t next = 0;
    for (std::size_t v = 0; v < n_values; ++v) {
      if (contribution[v] > 0.0) next |= 1ULL << v;
    }
    if (next == 0) {
      // keep the single best value (smallest code on ties)
      std::size_t best = 0;
      for (std::size_t v = 1; v < n_values; ++v) {
        if (contribution[v] > contribution[best]) best = v;
      }
      next = 1ULL << best;
    }
    if (next == current.included[attribute]) break;
    current.included[attribute] = next;
  }
  return current;
}

Subgroup optimize_attribute(const AuditFrame& frame, const Subgroup& current,
                            const std::string& attribute, const ScanConfig& config) {
  const std::size_t a = frame.schema->attribute_index(attribute);
  SubgroupMask m = subgroup_to_mask(current, *frame.schema);
  m = optimize_attribute_mask(frame, std::move(m), a, config);
  return mask_to_subgroup(m, *frame.schema);
}

ScanResult ascend(const AuditFrame& frame, const ScanConfig& config, std::uint64_t seed) {
  config.validate();
  if (frame.size() == 0) throw DomainError("ascend: empty frame");
  const Schema& schema = *frame.schema;
  const std::size_t n_attrs = schema.n_attributes();
  Rng rng(seed);

  // random start: each value kept with probability 1/2, per-attribute
  // resampling of empty sets
  SubgroupMask mask;
  mask.included.resize(n_attrs);
  for (std::size_t a = 0; a < n_attrs; ++a) {
    const std::size_t k = schema.attribute(a).values.size();
    std::uint64_t bits = 0;
    do {
      bits = 0;
      for (std::size_t v = 0; v < k; ++v) {
        if (rng.bernoulli(0.5)) bits |= 1ULL << v;
      }
    } while (bits == 0);
    mask.included[a] = bits;
  }

  std::vector<std::size_t> order(n_attrs);
  std::iota(order.begin(), order.end(), 0);

  double prev_f = evaluate_mask(frame, mask, config.q_max).value.f;
  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    rng.shuffle(order);
    for (std::size_t a : order) mask = optimize_attribute_mask(frame, std::move(mask), a, config);
    const double f = evaluate_mask(frame, mask, config.q_max).value.f;
    if (f - prev_f < config.tol) {
      prev_f = std::max(prev_f, f);
      break;
    }
    prev_f = f;
  }

  ScanResult result = make_result(frame, mask, config.q_max);
  if (result.member_count == 0) {
    // empty local optimum carries no information; report the full frame
    result = make_result(frame, full_mask(schema), config.q_max);
  }
  return result;
}

ScanResult scan(const AuditFrame& frame, const ScanConfig& config) {
  config.validate();
  std::vector<ScanResult> results(static_cast<std::size_t>(config.restarts));
  // Threads only pay off for large frames; small scans run hot in loops.
  const bool wide = frame.size() * results.size() > (1u << 21);
  parallel_for_index(
      results.size(),
      [&](std::size_t r) { results[r] = ascend(frame, config, derive_seed(config.seed, r)); },
      wide ? 0 : 1);
  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (result_better(results[r], results[best], *frame.schema)) best = r;
  }
  return results[best];
}

std::uint64_t subgroup_count(const Schema& schema) {
  std::uint64_t count = 1;
  for (std::size_t a = 0; a < schema.n_attributes(); ++a) {
    const std::size_t k = schema.attribute(a).values.size();
    const std::uint64_t options = k >= 63 ? ~0ULL : ((1ULL << k) - 1ULL);
    if (count > (~0ULL >> 1) / std::max<std::uint64_t>(options, 1)) return ~0ULL >> 1;
    count *= options;
  }
  return count;
}

ScanResult brute_force_scan(const AuditFrame& frame, std::uint64_t budget, double q_max) {
  if (frame.size() == 0) throw DomainError("brute_force_scan: empty frame");
  const Schema& schema = *frame.schema;
  const std::uint64_t total = subgroup_count(schema);
  if (total > budget) {
    throw DomainError("brute_force_scan: " + std::to_string(total) +
                      " subgroups exceed the enumeration budget of " + std::to_string(budget));
  }
  const std::size_t n_attrs = schema.n_attributes();
  SubgroupMask mask;
  mask.included.assign(n_attrs, 1);  // odometer over non-empty masks

  ScanResult best;
  std::string best_desc;
  bool have_best = false;
  while (true) {
    const MaskEvaluation ev = evaluate_mask(frame, mask, q_max);
    if (ev.member_count > 0) {
      bool take = false;
      std::string desc;
      if (!have_best || ev.value.f > best.f) {
        take = true;
      } else if (ev.value.f == best.f) {
        if (ev.member_count < best.member_count) {
          take = true;
        } else if (ev.member_count == best.member_count) {
          desc = mask_to_subgroup(mask, schema).describe();
          if (best_desc.empty()) best_desc = mask_to_subgroup(best.mask, schema).describe();
          take = desc < best_desc;
        }
      }
      if (take) {
        best.mask = mask;
        best.f = ev.value.f;
        best.q = ev.value.q;
        best.q_unbounded = ev.value.q_unbounded;
        best.member_count = ev.member_count;
        best_desc = desc;  // may be empty; recomputed lazily on demand
        have_best = true;
      }
    }
    // advance odometer
    std::size_t a = 0;
    for (; a < n_attrs; ++a) {
      const std::size_t k = schema.attribute(a).values.size();
      const std::uint64_t top = k == 64 ? ~0ULL : ((1ULL << k) - 1ULL);
      if (mask.included[a] < top) {
        ++mask.included[a];
        break;
      }
      mask.included[a] = 1;
    }
    if (a == n_attrs) break;
  }
  if (!have_best) {
    // every candidate had empty membership; fall back to the full frame
    best = make_result(frame, full_mask(schema), q_max);
    return best;
  }
  best.subgroup = mask_to_subgroup(best.mask, schema);
  return best;
}

}  // namespace ijdi
