#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "ijdi/cli_io.hpp"
#include "ijdi/elicitation.hpp"
#include "ijdi/synthetic_lab.hpp"

namespace ijdi {

namespace {

using nlohmann::ordered_json;

// Flag combinations the engine cannot disambiguate; maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format10(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

// --- shared option bundles ---------------------------------------------------

struct DataOpts {
  std::string input;
  std::vector<std::string> features;
  std::string outcome = "y0";
  std::string prediction = "p_hat0";
  std::string base_rate;         // empty = fit in-process
  std::string threshold_column;  // empty = use constant
  double threshold_constant = std::nan("");

  ColumnBindings bindings() const {
    ColumnBindings b;
    b.features = features;
    b.outcome = outcome;
    b.prediction = prediction;
    if (!base_rate.empty()) b.base_rate = base_rate;
    if (!threshold_column.empty()) b.threshold_column = threshold_column;
    if (!std::isnan(threshold_constant)) b.threshold_constant = threshold_constant;
    return b;
  }

  AuditTable load() const { return load_table(input, bindings()); }
};

void add_data_options(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--input", d.input, "input CSV path")->required();
  cmd->add_option("--features", d.features, "feature column names (comma separated)")
      ->required()
      ->delimiter(',');
  cmd->add_option("--outcome", d.outcome, "binary outcome column");
  cmd->add_option("--prediction", d.prediction, "audited prediction column");
  cmd->add_option("--base-rate", d.base_rate,
                  "base-rate column; omitted = fit a logistic model in-process");
  cmd->add_option("--threshold-column", d.threshold_column, "per-record threshold column");
  cmd->add_option("--threshold", d.threshold_constant, "constant threshold");
}

struct ScanOpts {
  int restarts = 50;
  int max_sweeps = 50;
  double q_max = 1e6;
  double tol = 1e-9;
  int max_adjust_iters = 100;
  std::uint64_t seed = 0;

  IjdiConfig config() const {
    IjdiConfig c;
    c.scan.restarts = restarts;
    c.scan.max_sweeps = max_sweeps;
    c.scan.q_max = q_max;
    c.scan.tol = tol;
    c.scan.seed = seed;
    c.max_adjust_iters = max_adjust_iters;
    return c;
  }
};

void add_scan_options(CLI::App* cmd, ScanOpts& s) {
  cmd->add_option("--restarts", s.restarts, "random restarts per scan");
  cmd->add_option("--max-sweeps", s.max_sweeps, "attribute sweeps per restart");
  cmd->add_option("--q-max", s.q_max, "risk-factor cap");
  cmd->add_option("--tol", s.tol, "per-sweep score improvement tolerance");
  cmd->add_option("--max-adjust-iters", s.max_adjust_iters, "correction-loop backstop");
  cmd->add_option("--seed", s.seed, "random seed");
}

struct LambdaOpts {
  double lambda = std::nan("");
  double cost_fp = std::nan("");
  double cost_fn = std::nan("");
  double cost_dfpr = std::nan("");
  double cost_dtpr = std::nan("");
  std::string elicit_file;
  bool skip_flagged = false;

  // Returns the effective lambda; enforces exactly one source.
  double resolve(Side side) const;
};

void add_lambda_options(CLI::App* cmd, LambdaOpts& l) {
  cmd->add_option("--lambda", l.lambda, "base-rate tolerance (direct value)");
  cmd->add_option("--cost-fp", l.cost_fp, "cost of a false positive");
  cmd->add_option("--cost-fn", l.cost_fn, "cost of a false negative");
  cmd->add_option("--cost-dfpr", l.cost_dfpr, "cost of one unit of FPR disparity");
  cmd->add_option("--cost-dtpr", l.cost_dtpr, "cost of one unit of TPR disparity");
  cmd->add_option("--elicit-file", l.elicit_file, "questionnaire CSV (z1,z2,z3)");
  cmd->add_flag("--skip-flagged", l.skip_flagged,
                "drop inconsistent questionnaire rows instead of failing");
}

std::vector<ElicitationResponse> read_responses(const std::string& path) {
  const CsvTable csv = read_csv(path);
  const std::size_t c1 = csv.column("z1"), c2 = csv.column("z2"), c3 = csv.column("z3");
  std::vector<ElicitationResponse> out;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    ElicitationResponse r;
    try {
      r.z1 = std::stoi(csv.rows[i][c1]);
      r.z2 = std::stoi(csv.rows[i][c2]);
      r.z3 = std::stoi(csv.rows[i][c3]);
    } catch (const std::exception&) {
      throw DomainError("row " + std::to_string(i + 1) + ": answers must be integers");
    }
    out.push_back(r);
  }
  return out;
}

// Splits responses into consistent ones and 1-based flagged row numbers.
std::pair<std::vector<ElicitationResponse>, std::vector<std::size_t>> screen_responses(
    const std::vector<ElicitationResponse>& responses) {
  std::vector<ElicitationResponse> ok;
  std::vector<std::size_t> flagged;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (validate(responses[i]).ok) {
      ok.push_back(responses[i]);
    } else {
      flagged.push_back(i + 1);
    }
  }
  return {ok, flagged};
}

double lambda_from_elicitation(const std::string& path, Side side, double cost_fp, double cost_fn,
                               bool skip_flagged) {
  auto [ok, flagged] = screen_responses(read_responses(path));
  if (!flagged.empty() && !skip_flagged) {
    std::string rows;
    for (std::size_t r : flagged) rows += (rows.empty() ? "" : ", ") + std::to_string(r);
    throw DomainError("inconsistent questionnaire rows (" + rows +
                      "); re-ask them or pass --skip-flagged");
  }
  if (ok.empty()) throw DomainError("no usable questionnaire responses");
  const double ratio = cost_ratio_regression(ok);
  if (ratio <= 0.0)
    throw DomainError("elicited disparity cost is zero; lambda would be unbounded");
  // ratio is cost(disparity)/cost(error) for the side's own error type
  return side == Side::Negative ? (1.0 + cost_fn / cost_fp) / ratio
                                : (1.0 + cost_fp / cost_fn) / ratio;
}

double LambdaOpts::resolve(Side side) const {
  const bool has_direct = !std::isnan(lambda);
  const bool has_costs = !std::isnan(cost_dfpr) || !std::isnan(cost_dtpr);
  const bool has_elicit = !elicit_file.empty();
  if (has_direct + has_costs + has_elicit > 1)
    throw UsageError("pick one lambda source: --lambda, a cost profile, or --elicit-file");
  if (has_direct) {
    if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
    return lambda;
  }
  if (has_costs) {
    if (side == Side::Negative && std::isnan(cost_dfpr))
      throw UsageError("the negative side needs --cost-dfpr");
    if (side == Side::Positive && std::isnan(cost_dtpr))
      throw UsageError("the positive side needs --cost-dtpr");
    CostProfile costs;
    costs.cost_fp = std::isnan(cost_fp) ? 1.0 : cost_fp;
    costs.cost_fn = std::isnan(cost_fn) ? 1.0 : cost_fn;
    costs.cost_dfpr = std::isnan(cost_dfpr) ? 1.0 : cost_dfpr;
    costs.cost_dtpr = std::isnan(cost_dtpr) ? 1.0 : cost_dtpr;
    return lambda_from_costs(costs, side);
  }
  if (has_elicit) {
    return lambda_from_elicitation(elicit_file, side, std::isnan(cost_fp) ? 1.0 : cost_fp,
                                   std::isnan(cost_fn) ? 1.0 : cost_fn, skip_flagged);
  }
  throw UsageError("no lambda source given: --lambda, a cost profile, or --elicit-file");
}

Side parse_side(const std::string& s) {
  if (s == "negative" || s == "neg") return Side::Negative;
  if (s == "positive" || s == "pos") return Side::Positive;
  throw UsageError("side must be 'negative' or 'positive'");
}

struct OutputOpts {
  std::string out;            // empty = stdout
  std::string format = "json";
  std::string config_file;    // echoed verbatim when present
};

void add_output_options(CLI::App* cmd, OutputOpts& o) {
  cmd->add_option("--out", o.out, "report path (default: stdout)");
  cmd->add_option("--format", o.format, "json | csv-summary")
      ->check(CLI::IsMember({"json", "csv-summary"}));
}

void deliver(const OutputOpts& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out, text);
  }
}

std::string read_file_or_empty(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- audit / scan / significance ---------------------------------------------

struct AuditCmd {
  DataOpts data;
  ScanOpts scan;
  LambdaOpts lambda;
  OutputOpts output;
  std::string side_name = "negative";
  int replicates = 0;  // 0 = no significance test
  double alpha = 0.05;
  bool force_lambda_zero = false;
  bool force_significance = false;
};

ordered_json config_echo(const AuditCmd& c, double lambda, Side side) {
  ordered_json j;
  j["input"] = c.data.input;
  j["features"] = c.data.features;
  j["outcome"] = c.data.outcome;
  j["prediction"] = c.data.prediction;
  j["base_rate"] = c.data.base_rate.empty() ? ordered_json(nullptr) : ordered_json(c.data.base_rate);
  if (!c.data.threshold_column.empty()) {
    j["threshold_column"] = c.data.threshold_column;
  } else if (!std::isnan(c.data.threshold_constant)) {
    j["threshold"] = round10(c.data.threshold_constant);
  }
  j["side"] = side_name(side);
  j["lambda"] = round10(lambda);
  j["restarts"] = c.scan.restarts;
  j["max_sweeps"] = c.scan.max_sweeps;
  j["q_max"] = round10(c.scan.q_max);
  j["tol"] = round10(c.scan.tol);
  j["max_adjust_iters"] = c.scan.max_adjust_iters;
  j["replicates"] = c.replicates;
  j["alpha"] = round10(c.alpha);
  j["seed"] = c.scan.seed;
  if (!c.output.config_file.empty()) {
    j["config_file"] = c.output.config_file;
    j["config_file_text"] = read_file_or_empty(c.output.config_file);
  }
  return j;
}

int run_audit_like(const AuditCmd& opts, const std::string& command) {
  AuditCmd c = opts;
  if (c.force_significance && c.replicates <= 0) c.replicates = 99;
  const Side side = parse_side(c.side_name);
  const double lambda = c.force_lambda_zero ? 0.0 : c.lambda.resolve(side);
  const AuditTable table = c.data.load();
  const IjdiConfig config = c.scan.config();

  IjdiResult result;
  std::optional<bool> significant;
  std::optional<double> pv;
  const int replicates = c.replicates;
  if (replicates > 0) {
    SignificanceConfig sig;
    sig.replicates = replicates;
    sig.alpha = c.alpha;
    sig.seed = derive_seed(c.scan.seed, 0x5157);
    const PValueResult pr = p_value(table, lambda, side, config, sig);
    result = pr.observed;
    significant = pr.significant;
    pv = pr.p_value;
  } else {
    result = ijdi_scan(table, lambda, side, config);
  }

  // group stats and the criterion verdict on the unadjusted frame
  const AuditFrame frame = build_frame(table, side, lambda);
  std::optional<GroupStats> stats;
  std::optional<CriterionResult> criterion;
  const std::vector<std::uint8_t> member = membership(result.subgroup, frame);
  const std::size_t n_in = static_cast<std::size_t>(
      std::count(member.begin(), member.end(), std::uint8_t{1}));
  if (n_in > 0 && n_in < frame.size()) {
    stats = group_stats(frame, member);
    criterion = criterion_holds(frame, result.subgroup, lambda);
  }

  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["engine_version"] = kEngineVersion;
  report["command"] = command;
  report["config"] = config_echo(c, lambda, side);
  report["seed"] = c.scan.seed;
  report["side"] = side_name(side);
  report["lambda"] = round10(lambda);
  report["subgroup"] = subgroup_to_json(result.subgroup);
  report["score"] = round10(result.f);
  report["q"] = result.q_unbounded ? ordered_json("unbounded") : ordered_json(round10(result.q));
  report["member_count"] = result.member_count;
  if (stats) {
    ordered_json s;
    s["rate_in"] = round10(stats->rate_in);
    s["rate_out"] = round10(stats->rate_out);
    s["base_rate_in"] = round10(stats->p_in);
    s["base_rate_out"] = round10(stats->p_out);
    s["n_in"] = stats->n_in;
    s["n_out"] = stats->n_out;
    report["group_stats"] = std::move(s);
  } else {
    report["group_stats"] = nullptr;
  }
  if (criterion) {
    ordered_json cj;
    cj["holds"] = criterion->holds;
    cj["margin"] = round10(criterion->margin);
    cj["clause"] = criterion->base_rate_gap_positive ? "base_rate_gap" : "fallback";
    report["criterion"] = std::move(cj);
  } else {
    report["criterion"] = nullptr;
  }
  report["adjustments"] = adjustments_to_json(result.adjustments);
  report["p_value"] = pv ? ordered_json(round10(*pv)) : ordered_json(nullptr);
  report["significant"] = significant ? ordered_json(*significant) : ordered_json(nullptr);

  if (c.output.format == "json") {
    deliver(c.output, report.dump(2) + "\n");
  } else {
    CsvTable csv;
    csv.header = {"command", "side",          "lambda",        "score",       "q",
                  "subgroup", "member_count", "rate_in",       "rate_out",    "base_rate_in",
                  "base_rate_out", "margin",  "holds",         "p_value",     "significant",
                  "seed"};
    std::vector<std::string> row;
    row.push_back(command);
    row.push_back(side_name(side));
    row.push_back(format10(lambda));
    row.push_back(format10(result.f));
    row.push_back(result.q_unbounded ? "unbounded" : format10(result.q));
    row.push_back(result.subgroup.describe());
    row.push_back(std::to_string(result.member_count));
    row.push_back(stats ? format10(stats->rate_in) : "");
    row.push_back(stats ? format10(stats->rate_out) : "");
    row.push_back(stats ? format10(stats->p_in) : "");
    row.push_back(stats ? format10(stats->p_out) : "");
    row.push_back(criterion ? format10(criterion->margin) : "");
    row.push_back(criterion ? (criterion->holds ? "true" : "false") : "");
    row.push_back(pv ? format10(*pv) : "");
    row.push_back(significant ? (*significant ? "true" : "false") : "");
    row.push_back(std::to_string(c.scan.seed));
    csv.rows.push_back(std::move(row));
    deliver(c.output, csv_to_string(csv));
  }
  return 0;
}

// --- mitigate ------------------------------------------------------------------

ThresholdPolicy policy_from_json(const ordered_json& j) {
  ThresholdPolicy policy;
  if (!j.is_object() || !j.contains("default"))
    throw DomainError("policy file needs a top-level 'default' threshold");
  policy.default_threshold = j.at("default").get<double>();
  if (j.contains("overrides")) {
    for (const auto& item : j.at("overrides")) {
      policy.overrides.emplace_back(subgroup_from_json(item.at("subgroup")),
                                    item.at("threshold").get<double>());
    }
  }
  return policy;
}

struct MitigateCmd {
  DataOpts data;
  ScanOpts scan;
  LambdaOpts lambda;
  OutputOpts output;
  std::string approach;
  std::string side_name = "negative";
  std::string policy_file;
  std::string report_subgroup;
  std::string mitigated_out;
  int max_corrections = 20;
  double score_floor = 1e-6;
  int replicates = 0;
  double alpha = 0.05;
  double theta_center = std::nan("");
  double delta = std::nan("");
};

int run_mitigate(const MitigateCmd& c) {
  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["engine_version"] = kEngineVersion;
  report["command"] = "mitigate";
  report["approach"] = c.approach;
  report["seed"] = c.scan.seed;

  if (c.approach == "policy") {
    if (c.policy_file.empty()) throw UsageError("--policy-file is required for --approach policy");
    if (c.report_subgroup.empty())
      throw UsageError("--report-subgroup is required for --approach policy");
    const AuditTable table = c.data.load();
    ordered_json pj;
    try {
      pj = ordered_json::parse(read_file_or_empty(c.policy_file));
    } catch (const nlohmann::json::parse_error& e) {
      throw DomainError(std::string("cannot parse policy file: ") + e.what());
    }
    const ThresholdPolicy policy = policy_from_json(pj);
    const AuditTable mitigated = apply_policy(table, policy);
    const Subgroup subgroup = subgroup_from_string(c.report_subgroup);
    const ErrorRateReport rates = error_rate_report(mitigated, subgroup);
    report["policy"] = pj;
    report["subgroup"] = subgroup_to_json(subgroup);
    report["fpr_in"] = round10(rates.fpr_in);
    report["fpr_out"] = round10(rates.fpr_out);
    report["tpr_in"] = round10(rates.tpr_in);
    report["tpr_out"] = round10(rates.tpr_out);
    if (!c.mitigated_out.empty()) write_csv(c.mitigated_out, table_to_csv(mitigated));
  } else if (c.approach == "iterative") {
    const Side side = parse_side(c.side_name);
    const double lambda = c.lambda.resolve(side);
    const AuditTable table = c.data.load();
    std::optional<SignificanceConfig> sig;
    if (c.replicates > 0) {
      sig = SignificanceConfig{};
      sig->replicates = c.replicates;
      sig->alpha = c.alpha;
      sig->seed = derive_seed(c.scan.seed, 0x5157);
    }
    const CorrectionTrace trace = iterative_correction(table, lambda, side, c.scan.config(), sig,
                                                       c.max_corrections, c.score_floor);
    report["side"] = side_name(side);
    report["lambda"] = round10(lambda);
    report["terminated"] = correction_termination_name(trace.terminated);
    ordered_json steps = ordered_json::array();
    for (const CorrectionStep& s : trace.steps) {
      ordered_json sj;
      sj["iteration"] = s.iteration;
      sj["subgroup"] = subgroup_to_json(s.subgroup);
      sj["eta"] = round10(s.eta);
      sj["score_before"] = round10(s.f_before);
      sj["p_value"] = s.p_value ? ordered_json(round10(*s.p_value)) : ordered_json(nullptr);
      steps.push_back(std::move(sj));
    }
    report["steps"] = std::move(steps);
    if (!c.mitigated_out.empty() && trace.final_table)
      write_csv(c.mitigated_out, table_to_csv(*trace.final_table));
  } else if (c.approach == "randomize") {
    if (std::isnan(c.theta_center) || std::isnan(c.delta))
      throw UsageError("--theta and --delta are required for --approach randomize");
    report["theta"] = round10(c.theta_center);
    report["delta"] = round10(c.delta);
    report["min_lambda_no_ijdi"] = round10(min_lambda_no_ijdi(c.delta));
    if (!c.data.input.empty()) {
      const AuditTable table = c.data.load();
      const std::vector<double> theta =
          randomize_thresholds(c.theta_center, c.delta, table.n_rows(), c.scan.seed);
      if (!c.mitigated_out.empty())
        write_csv(c.mitigated_out, table_to_csv(table.with_theta(theta)));
    }
  } else {
    throw UsageError("--approach must be policy, iterative, or randomize");
  }
  deliver(c.output, report.dump(2) + "\n");
  return 0;
}

// --- simulations ----------------------------------------------------------------

std::vector<double> parse_grid(const std::string& text) {
  // "a:b:step" inclusive grid, or a comma-separated list
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a, b, step;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0.0)
      throw UsageError("grid must look like start:stop:step");
    for (double v = a; v <= b + 1e-9; v += step) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw UsageError("empty lambda grid");
  return out;
}

struct TrialOutcome {
  double iou = 0.0;
  double score = 0.0;
};

struct SweepSpec {
  std::vector<Side> sides;
  std::vector<double> lambdas;
  int trials = 0;
};

// Runs fn(side, lambda, trial) over the whole grid concurrently and emits the
// per-trial and aggregate tables.
void run_sweep(const SweepSpec& spec,
               const std::function<TrialOutcome(Side, double, int)>& fn, const OutputOpts& output,
               const std::string& summary_out) {
  if (spec.trials <= 0) throw UsageError("--trials must be positive");
  struct Cell {
    Side side;
    double lambda;
    int trial;
  };
  std::vector<Cell> cells;
  for (Side side : spec.sides) {
    for (double lambda : spec.lambdas) {
      for (int t = 0; t < spec.trials; ++t) cells.push_back({side, lambda, t});
    }
  }
  std::vector<TrialOutcome> results(cells.size());
  parallel_for_index(cells.size(), [&](std::size_t i) {
    results[i] = fn(cells[i].side, cells[i].lambda, cells[i].trial);
  });

  CsvTable per_trial;
  per_trial.header = {"side", "lambda", "trial", "iou", "score"};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    per_trial.rows.push_back({side_name(cells[i].side), format10(cells[i].lambda),
                              std::to_string(cells[i].trial), format10(results[i].iou),
                              format10(results[i].score)});
  }
  deliver(output, csv_to_string(per_trial));

  if (!summary_out.empty()) {
    CsvTable summary;
    summary.header = {"side",       "lambda",    "trials",    "mean_iou",
                      "iou_ci_low", "iou_ci_high", "mean_score"};
    std::size_t idx = 0;
    for (Side side : spec.sides) {
      for (double lambda : spec.lambdas) {
        double sum = 0.0, sum2 = 0.0, score_sum = 0.0;
        for (int t = 0; t < spec.trials; ++t, ++idx) {
          sum += results[idx].iou;
          sum2 += results[idx].iou * results[idx].iou;
          score_sum += results[idx].score;
        }
        const double n = spec.trials;
        const double mean = sum / n;
        const double var = std::max(0.0, sum2 / n - mean * mean);
        const double half = 1.96 * std::sqrt(var / n);
        summary.rows.push_back({side_name(side), format10(lambda), std::to_string(spec.trials),
                                format10(mean), format10(mean - half), format10(mean + half),
                                format10(score_sum / n)});
      }
    }
    write_csv(summary_out, summary);
  }
}

struct SimulateExp1Cmd {
  std::size_t n = 5000;
  double k = 0.0;
  double theta = 0.5;
  std::uint64_t seed = 0;
  std::string attrs = "a:2,b:3,c:3";
  std::string planted = R"({"a":["a0"]})";
  std::string truth_out;
  std::string sweep_lambda;
  std::string sides = "negative";
  std::string summary_out;
  int trials = 20;
  ScanOpts scan;
  OutputOpts output;
};

std::vector<std::pair<std::string, std::size_t>> parse_attr_spec(const std::string& text) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("attribute spec must look like name:count");
    out.emplace_back(item.substr(0, colon),
                     static_cast<std::size_t>(std::stoul(item.substr(colon + 1))));
  }
  if (out.empty()) throw UsageError("empty attribute spec");
  return out;
}

std::vector<Side> parse_sides(const std::string& s) {
  if (s == "both") return {Side::Negative, Side::Positive};
  return {parse_side(s)};
}

int run_simulate_exp1(const SimulateExp1Cmd& c) {
  const auto attr_spec = parse_attr_spec(c.attrs);
  const Subgroup planted = subgroup_from_string(c.planted);

  if (c.sweep_lambda.empty()) {
    const FeatureFrame frame = make_feature_frame(c.n, attr_spec, derive_seed(c.seed, 1));
    Exp1Config cfg;
    cfg.k = c.k;
    cfg.planted = planted;
    cfg.theta = c.theta;
    cfg.seed = derive_seed(c.seed, 2);
    const GeneratedTable gen = generate_exp1(frame, cfg);
    deliver(c.output, csv_to_string(table_to_csv(gen.table)));
    if (!c.truth_out.empty()) {
      ordered_json truth;
      truth["planted"] = subgroup_to_json(gen.planted);
      truth["k"] = round10(c.k);
      truth["lambda_star"] = round10(lambda_star(c.k));
      write_text_file(c.truth_out, truth.dump(2) + "\n");
    }
    return 0;
  }

  SweepSpec spec;
  spec.sides = parse_sides(c.sides);
  spec.lambdas = parse_grid(c.sweep_lambda);
  spec.trials = c.trials;
  run_sweep(
      spec,
      [&](Side side, double lambda, int trial) {
        const std::uint64_t trial_seed = derive_seed(c.seed, static_cast<std::uint64_t>(trial));
        const FeatureFrame frame = make_feature_frame(c.n, attr_spec, derive_seed(trial_seed, 1));
        Exp1Config cfg;
        cfg.k = c.k;
        cfg.planted = planted;
        cfg.theta = c.theta;
        cfg.seed = derive_seed(trial_seed, 2);
        const GeneratedTable gen = generate_exp1(frame, cfg);
        IjdiConfig config = c.scan.config();
        config.scan.seed = derive_seed(trial_seed, 3);
        const IjdiResult res = ijdi_scan(gen.table, lambda, side, config);
        // a zero score means nothing was detected; score the overlap as 0
        double overlap = 0.0;
        if (res.f > 0.0) {
          const AuditFrame af = build_frame(gen.table, side, lambda);
          overlap = iou(res.subgroup, gen.planted, af);
        }
        return TrialOutcome{overlap, res.f};
      },
      c.output, c.summary_out);
  return 0;
}

struct SimulateExp2Cmd {
  std::size_t n = 5000;
  double gamma = 1.0;
  std::string mode = "probability";
  std::uint64_t seed = 0;
  bool learned_p = false;
  std::string truth_out;
  std::string sweep_lambda;
  std::string sides = "negative";
  std::string summary_out;
  int trials = 50;
  ScanOpts scan;
  OutputOpts output;
};

GeneratedTable make_exp2_table(std::size_t n, double gamma, ShiftMode mode, bool learned_p,
                               std::uint64_t seed) {
  const BiasedPopulation pop = make_biased_population(n, derive_seed(seed, 11));
  Exp2Config cfg;
  cfg.gamma = gamma;
  cfg.mode = mode;
  cfg.planted = pop.planted;
  cfg.base_model = pop.model;
  cfg.theta0 = pop.theta0;
  cfg.seed = derive_seed(seed, 12);
  GeneratedTable gen = generate_exp2(pop.features, cfg);
  if (learned_p) {
    const LogisticFit fit =
        fit_logistic(gen.table.schema(), gen.table.feature_codes(), gen.table.y0());
    gen.table = gen.table.with_p(fit.fitted);
  }
  return gen;
}

int run_simulate_exp2(const SimulateExp2Cmd& c) {
  const ShiftMode mode =
      c.mode == "threshold" ? ShiftMode::ShiftThreshold : ShiftMode::ShiftProbability;
  if (c.mode != "threshold" && c.mode != "probability")
    throw UsageError("--mode must be probability or threshold");

  if (c.sweep_lambda.empty()) {
    const GeneratedTable gen = make_exp2_table(c.n, c.gamma, mode, c.learned_p, c.seed);
    deliver(c.output, csv_to_string(table_to_csv(gen.table)));
    if (!c.truth_out.empty()) {
      ordered_json truth;
      truth["planted"] = subgroup_to_json(gen.planted);
      truth["gamma"] = round10(c.gamma);
      truth["mode"] = c.mode;
      write_text_file(c.truth_out, truth.dump(2) + "\n");
    }
    return 0;
  }

  SweepSpec spec;
  spec.sides = parse_sides(c.sides);
  spec.lambdas = parse_grid(c.sweep_lambda);
  spec.trials = c.trials;
  run_sweep(
      spec,
      [&](Side side, double lambda, int trial) {
        const std::uint64_t trial_seed = derive_seed(c.seed, static_cast<std::uint64_t>(trial));
        const GeneratedTable gen = make_exp2_table(c.n, c.gamma, mode, c.learned_p, trial_seed);
        IjdiConfig config = c.scan.config();
        config.scan.seed = derive_seed(trial_seed, 13);
        const IjdiResult res = ijdi_scan(gen.table, lambda, side, config);
        double overlap = 0.0;
        if (res.f > 0.0) {
          const AuditFrame af = build_frame(gen.table, side, lambda);
          overlap = iou(res.subgroup, gen.planted, af);
        }
        return TrialOutcome{overlap, res.f};
      },
      c.output, c.summary_out);
  return 0;
}

// --- elicit / oracle / prep-deciles ------------------------------------------

struct ElicitCmd {
  std::string responses;
  double cost_fp = 1.0;
  double cost_fn = 1.0;
  std::string side_name = "negative";
  bool skip_flagged = false;
  OutputOpts output;
};

int run_elicit(const ElicitCmd& c) {
  const Side side = parse_side(c.side_name);
  auto [ok, flagged] = screen_responses(read_responses(c.responses));
  if (!flagged.empty() && !c.skip_flagged) {
    std::string rows;
    for (std::size_t r : flagged) rows += (rows.empty() ? "" : ", ") + std::to_string(r);
    throw DomainError("inconsistent questionnaire rows (" + rows +
                      "); re-ask them or pass --skip-flagged");
  }
  if (ok.empty()) throw DomainError("no usable questionnaire responses");
  const double ratio = cost_ratio_regression(ok);

  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["engine_version"] = kEngineVersion;
  report["command"] = "elicit";
  report["side"] = side_name(side);
  report["responses_used"] = ok.size();
  ordered_json fl = ordered_json::array();
  for (std::size_t r : flagged) fl.push_back(r);
  report["flagged_rows"] = std::move(fl);
  report["cost_ratio"] = round10(ratio);
  ordered_json singles = ordered_json::array();
  for (const ElicitationResponse& r : ok) singles.push_back(round10(cost_ratio_single(r)));
  report["per_response_ratios"] = std::move(singles);
  if (ratio > 0.0) {
    const double lambda = side == Side::Negative ? (1.0 + c.cost_fn / c.cost_fp) / ratio
                                                 : (1.0 + c.cost_fp / c.cost_fn) / ratio;
    report["lambda"] = round10(lambda);
  } else {
    report["lambda"] = nullptr;  // zero disparity cost: unbounded tolerance
  }
  deliver(c.output, report.dump(2) + "\n");
  return 0;
}

struct PrepDecilesCmd {
  std::string input;
  std::string decile = "decile_score";
  std::string outcome = "y0";
  std::string prediction_name = "p_hat0";
  std::string out;
};

// Adds a prediction column equal to each decile's observed outcome rate.
int run_prep_deciles(const PrepDecilesCmd& c) {
  CsvTable csv = read_csv(c.input);
  const std::size_t dcol = csv.column(c.decile);
  const std::size_t ycol = csv.column(c.outcome);
  if (csv.has_column(c.prediction_name))
    throw DomainError("column '" + c.prediction_name + "' already exists");
  std::map<std::string, std::pair<double, double>> rate;  // decile -> (positives, total)
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const std::string& yv = csv.rows[i][ycol];
    if (yv != "0" && yv != "1")
      throw DomainError("row " + std::to_string(i + 1) + ": outcome '" + yv + "' is not 0 or 1");
    auto& entry = rate[csv.rows[i][dcol]];
    entry.first += yv == "1" ? 1.0 : 0.0;
    entry.second += 1.0;
  }
  csv.header.push_back(c.prediction_name);
  for (auto& row : csv.rows) {
    const auto& entry = rate[row[dcol]];
    row.push_back(format_double_exact(entry.first / entry.second));
  }
  if (c.out.empty()) {
    std::cout << csv_to_string(csv);
  } else {
    write_csv(c.out, csv);
  }
  return 0;
}

}  // namespace

// Flat key=value config document; lines become --key=value tokens injected
// right after the subcommand, so explicit flags override file keys.
std::vector<std::string> config_tokens(const std::string& text, const std::string& path) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw DomainError("config file " + path + " line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    const auto vfirst = value.find_first_not_of(" \t");
    value = vfirst == std::string::npos ? "" : value.substr(vfirst);
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

int run_command(const std::vector<std::string>& args_in) {
  CLI::App app{"fairness audit: subgroup scans for insufficiently justified error-rate disparities"};
  app.name("ijdi-audit");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  int status = 0;
  std::string config_path;
  std::vector<std::string> args = args_in;
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") {
        config_path = args[i + 1];
        args.erase(args.begin() + i, args.begin() + i + 2);
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        config_path = args[i].substr(9);
        args.erase(args.begin() + i);
        break;
      }
    }
    if (!config_path.empty()) {
      if (args.empty()) {
        std::cerr << "usage error: --config needs a subcommand\n";
        return 2;
      }
      const std::vector<std::string> injected =
          config_tokens(read_file_or_empty(config_path), config_path);
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  auto make_audit_like = [&](const char* name, const char* help, bool lambda_zero,
                             bool significance_default) {
    CLI::App* cmd = app.add_subcommand(name, help);
    auto holder = std::make_shared<AuditCmd>();
    AuditCmd* opts = holder.get();
    add_data_options(cmd, opts->data);
    add_scan_options(cmd, opts->scan);
    if (!lambda_zero) add_lambda_options(cmd, opts->lambda);
    add_output_options(cmd, opts->output);
    cmd->add_option("--side", opts->side_name, "negative (FPR) or positive (TPR)");
    cmd->add_option("--replicates", opts->replicates, "null replicates for the p-value");
    cmd->add_option("--alpha", opts->alpha, "significance level");
    opts->force_lambda_zero = lambda_zero;
    opts->force_significance = significance_default;
    cmd->callback([&status, opts, name, this_config = &config_path] {
      opts->output.config_file = *this_config;
      status = run_audit_like(*opts, name);
    });
    return holder;
  };
  auto audit_holder = make_audit_like(
      "audit", "scan one side for the most anomalous subgroup under a lambda tolerance", false,
      false);
  auto scan_holder =
      make_audit_like("scan", "error-rate balance scan (lambda = 0)", true, false);
  auto significance_holder = make_audit_like(
      "significance", "audit plus randomization-test p-value (99 replicates by default)", false,
      true);

  MitigateCmd mit;
  {
    CLI::App* cmd = app.add_subcommand("mitigate", "apply a mitigation approach");
    add_data_options(cmd, mit.data);
    cmd->get_option("--input")->required(false);
    cmd->get_option("--features")->required(false);
    add_scan_options(cmd, mit.scan);
    add_lambda_options(cmd, mit.lambda);
    add_output_options(cmd, mit.output);
    cmd->add_option("--approach", mit.approach, "policy | iterative | randomize")->required();
    cmd->add_option("--side", mit.side_name, "negative or positive");
    cmd->add_option("--policy-file", mit.policy_file, "threshold policy JSON");
    cmd->add_option("--report-subgroup", mit.report_subgroup,
                    "subgroup JSON for the error-rate report");
    cmd->add_option("--mitigated-out", mit.mitigated_out, "write the corrected table CSV here");
    cmd->add_option("--max-corrections", mit.max_corrections, "iterative correction cap");
    cmd->add_option("--score-floor", mit.score_floor, "stop when the detected score drops below");
    cmd->add_option("--replicates", mit.replicates, "significance replicates per correction");
    cmd->add_option("--alpha", mit.alpha, "significance level");
    cmd->add_option("--theta", mit.theta_center, "randomization center");
    cmd->add_option("--delta", mit.delta, "randomization half-width");
    cmd->callback([&status, &mit] { status = run_mitigate(mit); });
  }

  SimulateExp1Cmd sim1;
  {
    CLI::App* cmd =
        app.add_subcommand("simulate-exp1", "uniform-band fixture with a known cutoff");
    cmd->add_option("--n", sim1.n, "rows");
    cmd->add_option("--k", sim1.k, "band half-width scale (bands 0.51/0.49 +/- 0.01k)");
    cmd->add_option("--theta", sim1.theta, "sharp threshold");
    cmd->add_option("--seed", sim1.seed, "random seed");
    cmd->add_option("--attrs", sim1.attrs, "feature spec, e.g. a:2,b:3,c:3");
    cmd->add_option("--planted", sim1.planted, "planted subgroup JSON");
    cmd->add_option("--truth-out", sim1.truth_out, "ground-truth JSON path");
    cmd->add_option("--sweep-lambda", sim1.sweep_lambda, "lambda grid start:stop:step");
    cmd->add_option("--sides", sim1.sides, "negative | positive | both");
    cmd->add_option("--trials", sim1.trials, "trials per lambda");
    cmd->add_option("--summary-out", sim1.summary_out, "aggregate table path");
    cmd->add_option("--restarts", sim1.scan.restarts, "random restarts per scan");
    cmd->add_option("--out", sim1.output.out, "output path (default: stdout)");
    cmd->callback([&status, &sim1] { status = run_simulate_exp1(sim1); });
  }

  SimulateExp2Cmd sim2;
  {
    CLI::App* cmd =
        app.add_subcommand("simulate-exp2", "biased-predictions fixture over a correlated population");
    cmd->add_option("--n", sim2.n, "rows");
    cmd->add_option("--gamma", sim2.gamma, "log-odds shift inside the planted subgroup");
    cmd->add_option("--mode", sim2.mode, "probability | threshold");
    cmd->add_option("--seed", sim2.seed, "random seed");
    cmd->add_flag("--learned-p", sim2.learned_p, "replace base rates with fitted estimates");
    cmd->add_option("--truth-out", sim2.truth_out, "ground-truth JSON path");
    cmd->add_option("--sweep-lambda", sim2.sweep_lambda, "lambda grid start:stop:step");
    cmd->add_option("--sides", sim2.sides, "negative | positive | both");
    cmd->add_option("--trials", sim2.trials, "trials per lambda");
    cmd->add_option("--summary-out", sim2.summary_out, "aggregate table path");
    cmd->add_option("--restarts", sim2.scan.restarts, "random restarts per scan");
    cmd->add_option("--out", sim2.output.out, "output path (default: stdout)");
    cmd->callback([&status, &sim2] { status = run_simulate_exp2(sim2); });
  }

  ElicitCmd eli;
  {
    CLI::App* cmd = app.add_subcommand("elicit", "cost ratios and lambda from questionnaire answers");
    cmd->add_option("--responses", eli.responses, "CSV with z1,z2,z3 columns")->required();
    cmd->add_option("--cost-fp", eli.cost_fp, "cost of a false positive");
    cmd->add_option("--cost-fn", eli.cost_fn, "cost of a false negative");
    cmd->add_option("--side", eli.side_name, "negative or positive");
    cmd->add_flag("--skip-flagged", eli.skip_flagged, "drop inconsistent rows instead of failing");
    add_output_options(cmd, eli.output);
    cmd->callback([&status, &eli] { status = run_elicit(eli); });
  }

  double oracle_k = 0.0;
  {
    CLI::App* cmd = app.add_subcommand("oracle-lambda-star",
                                       "closed-form cutoff for the uniform-band fixture");
    cmd->add_option("--k", oracle_k, "band half-width scale")->required();
    cmd->callback([&status, &oracle_k] {
      ordered_json j;
      j["k"] = round10(oracle_k);
      j["lambda_star"] = round10(lambda_star(oracle_k));
      std::cout << j.dump(2) << "\n";
      status = 0;
    });
  }

  PrepDecilesCmd prep;
  {
    CLI::App* cmd = app.add_subcommand(
        "prep-deciles", "map a decile-score column to its observed outcome rate");
    cmd->add_option("--input", prep.input, "input CSV")->required();
    cmd->add_option("--decile", prep.decile, "decile column");
    cmd->add_option("--outcome", prep.outcome, "binary outcome column");
    cmd->add_option("--prediction-name", prep.prediction_name, "name of the added column");
    cmd->add_option("--out", prep.out, "output CSV (default: stdout)");
    cmd->callback([&status, &prep] { status = run_prep_deciles(prep); });
  }

  app.footer("--config FILE    flat key=value document; explicit flags override file keys");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}

}  // namespace ijdi
