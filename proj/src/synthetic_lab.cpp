#include "ijdi/synthetic_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ijdi {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t draw_categorical(Rng& rng, std::span<const double> probs) {
  double u = rng.next_double();
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return probs.size() - 1;
}

}  // namespace

FeatureFrame make_feature_frame(std::size_t n,
                                const std::vector<std::pair<std::string, std::size_t>>& attrs,
                                std::uint64_t seed) {
  if (n == 0) throw DomainError("feature frame needs at least one row");
  std::vector<Attribute> schema_attrs;
  for (const auto& [name, card] : attrs) {
    if (card == 0) throw DomainError("attribute '" + name + "' needs at least one value");
    Attribute a;
    a.name = name;
    for (std::size_t v = 0; v < card; ++v) a.values.push_back(name + std::to_string(v));
    schema_attrs.push_back(std::move(a));
  }
  FeatureFrame frame;
  frame.schema = Schema(std::move(schema_attrs));
  frame.codes.resize(attrs.size());
  Rng rng(seed);
  for (std::size_t m = 0; m < attrs.size(); ++m) {
    frame.codes[m].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      frame.codes[m][i] = static_cast<std::uint16_t>(rng.next_below(attrs[m].second));
    }
  }
  return frame;
}

GeneratedTable generate_exp1(const FeatureFrame& features, const Exp1Config& config) {
  if (!(config.k >= 0.0)) throw DomainError("k must be non-negative");
  const double half = 0.01 * config.k;
  if (0.51 + half > 1.0 || 0.49 - half < 0.0)
    throw DomainError("band half-width 0.01k pushes the bands outside [0,1]");
  if (!(config.theta >= 0.0 && config.theta <= 1.0)) throw DomainError("theta out of [0,1]");
  config.planted.validate(features.schema);

  const std::size_t n = features.n_rows();
  // membership over the raw feature rows
  std::vector<std::uint8_t> member(n, 1);
  for (const auto& [name, values] : config.planted.included) {
    const std::size_t m = features.schema.attribute_index(name);
    std::uint64_t mask = 0;
    for (const std::string& v : values) mask |= 1ULL << features.schema.value_code(m, v);
    for (std::size_t i = 0; i < n; ++i) {
      if (!((mask >> features.codes[m][i]) & 1ULL)) member[i] = 0;
    }
  }
  const std::size_t n_in = std::accumulate(member.begin(), member.end(), std::size_t{0});
  if (n_in == 0 || n_in == n)
    throw DomainError("planted subgroup must be neither empty nor the whole frame");

  Rng rng(config.seed);
  std::vector<double> p(n), theta(n, config.theta);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double center = member[i] ? 0.51 : 0.49;
    p[i] = half > 0.0 ? rng.uniform(center - half, center + half) : center;
    y[i] = rng.bernoulli(p[i]) ? 1 : 0;
  }
  std::vector<double> p_hat0 = p;  // audited predictions equal the true probabilities
  GeneratedTable out{AuditTable(features.schema, features.codes, std::move(y), std::move(p_hat0),
                                std::move(p), std::move(theta)),
                     config.planted};
  return out;
}

double lambda_star(double k) {
  if (!(k >= 0.0)) throw DomainError("k must be non-negative");
  if (k < 1.0) return 50.0;
  return (75.0 / k) * (4999.0 - k * k) / (7497.0 - k * k);
}

double logit_shift_probability(double p, double gamma) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability out of [0,1]");
  if (p == 0.0 || p == 1.0) return p;  // fixed points
  const double eg = std::exp(gamma);
  return p * eg / (p * eg + 1.0 - p);
}

double logit_shift_threshold(double theta0, double gamma) {
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw DomainError("theta0 must lie in (0,1)");
  const double eg = std::exp(-gamma);
  return theta0 * eg / (theta0 * eg + 1.0 - theta0);
}

void LogitModel::validate(const Schema& schema) const {
  if (attributes.size() != coef.size())
    throw SchemaError("model attribute/coefficient count mismatch");
  for (std::size_t j = 0; j < attributes.size(); ++j) {
    const std::size_t m = schema.attribute_index(attributes[j]);
    if (coef[j].size() != schema.attribute(m).values.size())
      throw SchemaError("coefficient vector for '" + attributes[j] +
                        "' does not match its value domain");
  }
}

double LogitModel::predict(const Schema& schema,
                           const std::vector<std::vector<std::uint16_t>>& codes,
                           std::size_t row) const {
  double z = intercept;
  for (std::size_t j = 0; j < attributes.size(); ++j) {
    const std::size_t m = schema.attribute_index(attributes[j]);
    z += coef[j][codes[m][row]];
  }
  return sigmoid(z);
}

GeneratedTable generate_exp2(const FeatureFrame& features, const Exp2Config& config) {
  if (!(config.theta0 > 0.0 && config.theta0 < 1.0))
    throw DomainError("theta0 must lie in (0,1)");
  config.planted.validate(features.schema);
  config.base_model.validate(features.schema);
  for (const std::string& attr : config.base_model.attributes) {
    if (config.planted.included.count(attr))
      throw DomainError("base model must not use the planted attribute '" + attr + "'");
  }

  const std::size_t n = features.n_rows();
  std::vector<std::uint8_t> member(n, 1);
  for (const auto& [name, values] : config.planted.included) {
    const std::size_t m = features.schema.attribute_index(name);
    std::uint64_t mask = 0;
    for (const std::string& v : values) mask |= 1ULL << features.schema.value_code(m, v);
    for (std::size_t i = 0; i < n; ++i) {
      if (!((mask >> features.codes[m][i]) & 1ULL)) member[i] = 0;
    }
  }

  Rng rng(config.seed);
  std::vector<double> p(n), p_hat0(n), theta(n, config.theta0);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = config.base_model.predict(features.schema, features.codes, i);
    y[i] = rng.bernoulli(p[i]) ? 1 : 0;
    p_hat0[i] = p[i];
  }
  if (config.mode == ShiftMode::ShiftProbability) {
    for (std::size_t i = 0; i < n; ++i) {
      if (member[i]) p_hat0[i] = logit_shift_probability(p[i], config.gamma);
    }
  } else {
    const double shifted = logit_shift_threshold(config.theta0, config.gamma);
    for (std::size_t i = 0; i < n; ++i) {
      if (member[i]) theta[i] = shifted;
    }
  }
  GeneratedTable out{AuditTable(features.schema, features.codes, std::move(y), std::move(p_hat0),
                                std::move(p), std::move(theta)),
                     config.planted};
  return out;
}

namespace {

// Dense symmetric solve via Cholesky; dimensions here are tiny.
std::vector<double> cholesky_solve(std::vector<std::vector<double>> h, std::vector<double> b) {
  const std::size_t d = b.size();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = h[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= h[i][k] * h[j][k];
      if (i == j) {
        if (s <= 0.0) throw InternalError("Hessian not positive definite");
        h[i][i] = std::sqrt(s);
      } else {
        h[i][j] = s / h[j][j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= h[i][k] * b[k];
    b[i] = s / h[i][i];
  }
  for (std::size_t i = d; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= h[k][i] * b[k];
    b[i] = s / h[i][i];
  }
  return b;
}

}  // namespace

LogisticFit fit_logistic(const Schema& schema,
                         const std::vector<std::vector<std::uint16_t>>& codes,
                         std::span<const std::uint8_t> y, double ridge, double grad_tol,
                         int max_iters) {
  const std::size_t n = y.size();
  if (n == 0) throw DomainError("fit_logistic: empty outcome vector");
  if (codes.size() != schema.n_attributes()) throw SchemaError("fit_logistic: column mismatch");
  for (const auto& col : codes) {
    if (col.size() != n) throw SchemaError("fit_logistic: column length mismatch");
  }
  std::size_t positives = 0;
  for (std::uint8_t v : y) positives += v;
  if (positives == 0 || positives == n)
    throw DomainError("fit_logistic: needs both outcome classes");

  // reference coding: level 0 of each attribute folds into the intercept
  const std::size_t n_attrs = schema.n_attributes();
  std::vector<std::size_t> offset(n_attrs);
  std::size_t d = 1;
  for (std::size_t m = 0; m < n_attrs; ++m) {
    offset[m] = d;
    d += schema.attribute(m).values.size() - 1;
  }

  // per-row active parameter columns (intercept + one dummy per attribute)
  std::vector<std::vector<std::uint32_t>> active(n);
  for (std::size_t i = 0; i < n; ++i) {
    active[i].push_back(0);
    for (std::size_t m = 0; m < n_attrs; ++m) {
      const std::uint16_t c = codes[m][i];
      if (c > 0) active[i].push_back(static_cast<std::uint32_t>(offset[m] + c - 1));
    }
  }

  std::vector<double> beta(d, 0.0), z(n, 0.0), mu(n, 0.5);
  const auto recompute = [&](const std::vector<double>& b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double zi = 0.0;
      for (std::uint32_t j : active[i]) zi += b[j];
      z[i] = zi;
      mu[i] = sigmoid(zi);
      // log-likelihood via the numerically stable log(1 + e^z) form
      const double soft = zi > 0.0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
      ll += (y[i] ? zi : 0.0) - soft;
    }
    double penalty = 0.0;
    for (double bj : b) penalty += bj * bj;
    return ll - 0.5 * ridge * penalty;
  };

  double ll = recompute(beta);
  LogisticFit fit;
  fit.ll_trace.push_back(ll);
  std::vector<double> grad(d);
  std::vector<std::vector<double>> hess(d, std::vector<double>(d, 0.0));
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (auto& row : hess) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = static_cast<double>(y[i]) - mu[i];
      const double w = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
      for (std::uint32_t a : active[i]) {
        grad[a] += r;
        for (std::uint32_t b : active[i]) hess[a][b] += w;
      }
    }
    double gmax = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      grad[j] -= ridge * beta[j];
      hess[j][j] += ridge;
      gmax = std::max(gmax, std::abs(grad[j]));
    }
    fit.gradient_norm = gmax;
    if (gmax <= grad_tol) break;

    const std::vector<double> step = cholesky_solve(hess, grad);
    double scale = 1.0;
    std::vector<double> candidate(d);
    for (int halving = 0; halving < 40; ++halving) {
      for (std::size_t j = 0; j < d; ++j) candidate[j] = beta[j] + scale * step[j];
      const double cand_ll = recompute(candidate);
      if (cand_ll >= ll) {
        beta = candidate;
        ll = cand_ll;
        break;
      }
      scale *= 0.5;
      if (halving == 39) recompute(beta);  // restore z, mu for the current beta
    }
    fit.ll_trace.push_back(ll);
  }

  fit.iterations = iter;
  fit.log_likelihood = ll;
  fit.fitted.resize(n);
  for (std::size_t i = 0; i < n; ++i) fit.fitted[i] = mu[i];

  fit.model.intercept = beta[0];
  fit.model.attributes.reserve(n_attrs);
  fit.model.coef.reserve(n_attrs);
  for (std::size_t m = 0; m < n_attrs; ++m) {
    fit.model.attributes.push_back(schema.attribute(m).name);
    std::vector<double> c(schema.attribute(m).values.size(), 0.0);
    for (std::size_t v = 1; v < c.size(); ++v) c[v] = beta[offset[m] + v - 1];
    fit.model.coef.push_back(std::move(c));
  }
  return fit;
}

LogisticFit fit_logistic_subset(const Schema& schema,
                                const std::vector<std::vector<std::uint16_t>>& codes,
                                std::span<const std::uint8_t> y,
                                const std::vector<std::string>& attributes) {
  if (attributes.empty()) throw DomainError("fit_logistic_subset: no attributes selected");
  std::vector<Attribute> sub_attrs;
  std::vector<std::vector<std::uint16_t>> sub_codes;
  for (const std::string& name : attributes) {
    const std::size_t m = schema.attribute_index(name);
    sub_attrs.push_back(schema.attribute(m));
    sub_codes.push_back(codes[m]);
  }
  return fit_logistic(Schema(std::move(sub_attrs)), sub_codes, y);
}

GeneratedTable generate_exp2(const AuditTable& source, const Exp2Config& config) {
  FeatureFrame features;
  features.schema = source.schema();
  features.codes = source.feature_codes();
  if (!config.base_model.attributes.empty()) return generate_exp2(features, config);

  // fit the base model from the table itself, over the non-planted attributes
  Exp2Config fitted = config;
  std::vector<std::string> model_attrs;
  for (std::size_t m = 0; m < source.schema().n_attributes(); ++m) {
    const std::string& name = source.schema().attribute(m).name;
    if (!config.planted.included.count(name)) model_attrs.push_back(name);
  }
  if (model_attrs.empty())
    throw DomainError("every attribute is planted; nothing left for the base model");
  fitted.base_model =
      fit_logistic_subset(source.schema(), source.feature_codes(), source.y0(), model_attrs)
          .model;
  return generate_exp2(features, fitted);
}

double iou(const Subgroup& detected, const Subgroup& planted, const AuditFrame& frame) {
  const std::vector<std::uint8_t> a = membership(detected, frame);
  const std::vector<std::uint8_t> b = membership(planted, frame);
  std::size_t inter = 0, uni = 0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (a[k] && b[k]) ++inter;
    if (a[k] || b[k]) ++uni;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BiasedPopulation make_biased_population(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("population needs at least one row");
  std::vector<Attribute> attrs = {
      {"priors", {"none", "few", "many"}},
      {"charge", {"misdemeanor", "felony"}},
      {"housing", {"own", "rent", "other"}},
      {"agegroup", {"over25", "under25"}},
      {"sex", {"male", "female"}},
  };
  BiasedPopulation pop;
  pop.features.schema = Schema(std::move(attrs));
  pop.features.codes.assign(5, std::vector<std::uint16_t>(n));
  pop.theta0 = 0.5;
  pop.planted.included = {{"agegroup", {"under25"}}, {"sex", {"female"}}};

  // three base-rate bands around the threshold: "none" stays low (~0.22,
  // below any moderate upward shift), "few" sits just under it (~0.45, so a
  // unit log-odds shift flips those recommendations), "many" is a natural
  // false-positive cluster (~0.70). The planted rows skew toward the middle
  // band, the complement toward the outer ones.
  const double planted_priors[3] = {0.38, 0.47, 0.15};
  const double other_priors[3] = {0.4897, 0.2383, 0.2720};
  const double charge_felony = 0.46;
  const double housing_probs[3] = {0.35, 0.40, 0.25};

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool under25 = rng.bernoulli(0.40);
    const bool female = rng.bernoulli(0.45);
    const bool in_planted = under25 && female;
    pop.features.codes[3][i] = under25 ? 1 : 0;
    pop.features.codes[4][i] = female ? 1 : 0;
    pop.features.codes[0][i] = static_cast<std::uint16_t>(
        draw_categorical(rng, in_planted ? planted_priors : other_priors));
    pop.features.codes[1][i] = rng.bernoulli(charge_felony) ? 1 : 0;
    pop.features.codes[2][i] = static_cast<std::uint16_t>(draw_categorical(rng, housing_probs));
  }

  // deliberately non-round coefficients: no cell's log-odds sits at a value
  // a round test shift could push exactly onto the threshold; charge and
  // housing only wiggle the bands without crossing them
  pop.model.attributes = {"priors", "charge", "housing"};
  pop.model.intercept = -0.2041;
  pop.model.coef = {
      {-1.0733, 0.0112, 1.0597},   // priors
      {-0.0231, 0.0219},           // charge
      {-0.0317, 0.0059, 0.0293},   // housing
  };
  return pop;
}

}  // namespace ijdi
