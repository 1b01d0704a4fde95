#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ijdi/data_model.hpp"

namespace ijdi {

// Categorical feature columns without outcomes; input to the generators.
struct FeatureFrame {
  Schema schema;
  std::vector<std::vector<std::uint16_t>> codes;  // per attribute, length n

  std::size_t n_rows() const { return codes.empty() ? 0 : codes[0].size(); }
};

// Independent uniform categorical columns; values of attribute "x" are named
// "x0", "x1", ... Handy for dataset-free experiments.
FeatureFrame make_feature_frame(std::size_t n,
                                const std::vector<std::pair<std::string, std::size_t>>& attrs,
                                std::uint64_t seed);

struct GeneratedTable {
  AuditTable table;
  Subgroup planted;
};

// Uniform-band construction: predictions equal true probabilities, drawn on
// [0.51 +/- 0.01k] inside the planted subgroup and [0.49 +/- 0.01k] outside;
// a sharp threshold binarizes them and outcomes are Bernoulli draws.
struct Exp1Config {
  double k = 0.0;
  Subgroup planted;
  double theta = 0.5;
  std::uint64_t seed = 0;
};

GeneratedTable generate_exp1(const FeatureFrame& features, const Exp1Config& config);

// Detectability cutoff of the uniform-band construction: the error-rate gap
// divided by the base-rate gap, in closed form. Identical for both sides.
double lambda_star(double k);

// Adds gamma to the log-odds of p: p e^g / (p e^g + 1 - p).
double logit_shift_probability(double p, double gamma);

// Subtracts gamma from the log-odds of theta0.
double logit_shift_threshold(double theta0, double gamma);

// Logistic model over a subset of the schema's attributes, one coefficient
// per attribute value plus an intercept.
struct LogitModel {
  std::vector<std::string> attributes;
  double intercept = 0.0;
  std::vector<std::vector<double>> coef;  // aligned with attributes, indexed by value code

  void validate(const Schema& schema) const;
  double predict(const Schema& schema, const std::vector<std::vector<std::uint16_t>>& codes,
                 std::size_t row) const;
};

enum class ShiftMode { ShiftProbability, ShiftThreshold };

// Biased-predictions construction: base rates come from a logistic model over
// the non-planted attributes; the planted subgroup's predictions (or
// thresholds) get a log-odds shift of gamma. Both modes produce identical
// recommendations for the same seed.
struct Exp2Config {
  double gamma = 0.0;
  ShiftMode mode = ShiftMode::ShiftProbability;
  Subgroup planted;
  LogitModel base_model;
  double theta0 = 0.5;
  std::uint64_t seed = 0;
};

GeneratedTable generate_exp2(const FeatureFrame& features, const Exp2Config& config);

// Same construction on an existing table's feature rows. A config with an
// empty base model means "fit from the table": a logistic model over the
// non-planted attributes, trained on the table's own outcomes.
GeneratedTable generate_exp2(const AuditTable& source, const Exp2Config& config);

struct LogisticFit {
  LogitModel model;            // reference level of each attribute at 0
  std::vector<double> fitted;  // per-row probabilities, strictly inside (0,1)
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<double> ll_trace;  // penalized log-likelihood after each step
};

// Damped-Newton maximum-likelihood logistic regression with intercept and a
// small ridge term for separable data. Needs both outcome classes present.
LogisticFit fit_logistic(const Schema& schema,
                         const std::vector<std::vector<std::uint16_t>>& codes,
                         std::span<const std::uint8_t> y, double ridge = 1e-6,
                         double grad_tol = 1e-8, int max_iters = 100);

// Logistic fit restricted to a subset of attributes (the others are ignored).
LogisticFit fit_logistic_subset(const Schema& schema,
                                const std::vector<std::vector<std::uint16_t>>& codes,
                                std::span<const std::uint8_t> y,
                                const std::vector<std::string>& attributes);

// Membership intersection-over-union of two subgroups within a frame;
// defined as 1 when both memberships are empty.
double iou(const Subgroup& detected, const Subgroup& planted, const AuditFrame& frame);

// A correlated five-attribute population with wide base-rate spread: the
// planted subgroup (young women) skews toward the high-base-rate levels of
// the model attributes, so its base rates genuinely exceed the complement's.
struct BiasedPopulation {
  FeatureFrame features;
  LogitModel model;
  Subgroup planted;
  double theta0 = 0.5;
};

BiasedPopulation make_biased_population(std::size_t n, std::uint64_t seed);

}  // namespace ijdi
