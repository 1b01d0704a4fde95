#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "ijdi/cli_io.hpp"
#include "ijdi/synthetic_lab.hpp"

namespace ijdi {

namespace {

double parse_number(const std::string& text, std::size_t row, const std::string& col) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || std::isnan(v)) {
    throw DomainError("row " + std::to_string(row) + ": cannot parse '" + text +
                      "' in column '" + col + "' as a number");
  }
  return v;
}

double parse_probability(const std::string& text, std::size_t row, const std::string& col) {
  const double v = parse_number(text, row, col);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError("row " + std::to_string(row) + ": value " + text + " in column '" + col +
                      "' is outside [0,1]");
  }
  return v;
}

}  // namespace

AuditTable table_from_csv(const CsvTable& csv, const ColumnBindings& bindings) {
  if (bindings.features.empty()) throw DomainError("no feature columns bound");
  if (csv.rows.empty()) throw DomainError("CSV has no data rows");
  if (bindings.threshold_column && bindings.threshold_constant)
    throw DomainError("bind either a threshold column or a constant, not both");
  if (!bindings.threshold_column && !bindings.threshold_constant)
    throw DomainError("no threshold bound: provide a column or a constant");

  std::vector<std::size_t> feature_cols;
  for (const std::string& f : bindings.features) feature_cols.push_back(csv.column(f));
  const std::size_t outcome_col = csv.column(bindings.outcome);
  const std::size_t prediction_col = csv.column(bindings.prediction);
  std::optional<std::size_t> base_rate_col;
  if (bindings.base_rate) base_rate_col = csv.column(*bindings.base_rate);
  std::optional<std::size_t> theta_col;
  if (bindings.threshold_column) theta_col = csv.column(*bindings.threshold_column);

  const std::size_t n = csv.rows.size();

  // attribute domains from observed values, in order of first appearance
  std::vector<Attribute> attrs(bindings.features.size());
  std::vector<std::map<std::string, std::uint16_t>> seen(bindings.features.size());
  std::vector<std::vector<std::uint16_t>> codes(bindings.features.size(),
                                                std::vector<std::uint16_t>(n));
  for (std::size_t m = 0; m < bindings.features.size(); ++m) attrs[m].name = bindings.features[m];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < feature_cols.size(); ++m) {
      const std::string& value = csv.rows[i][feature_cols[m]];
      auto [it, inserted] =
          seen[m].emplace(value, static_cast<std::uint16_t>(attrs[m].values.size()));
      if (inserted) {
        if (attrs[m].values.size() >= 64) {
          throw DomainError("row " + std::to_string(i + 1) + ": attribute '" +
                            bindings.features[m] +
                            "' exceeds 64 distinct values; discretize coarser");
        }
        attrs[m].values.push_back(value);
      }
      codes[m][i] = it->second;
    }
  }

  std::vector<std::uint8_t> y0(n);
  std::vector<double> p_hat0(n), theta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& yv = csv.rows[i][outcome_col];
    if (yv == "0") {
      y0[i] = 0;
    } else if (yv == "1") {
      y0[i] = 1;
    } else {
      throw DomainError("row " + std::to_string(i + 1) + ": outcome '" + yv +
                        "' is not 0 or 1");
    }
    p_hat0[i] = parse_probability(csv.rows[i][prediction_col], i + 1, bindings.prediction);
    if (theta_col) {
      theta[i] = parse_probability(csv.rows[i][*theta_col], i + 1, *bindings.threshold_column);
    } else {
      if (!(*bindings.threshold_constant >= 0.0 && *bindings.threshold_constant <= 1.0))
        throw DomainError("threshold constant outside [0,1]");
      theta[i] = *bindings.threshold_constant;
    }
  }

  Schema schema(std::move(attrs));
  std::vector<double> p(n);
  if (base_rate_col) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = parse_probability(csv.rows[i][*base_rate_col], i + 1, *bindings.base_rate);
    }
  } else {
    p = fit_logistic(schema, codes, y0).fitted;  // learned base rates
  }
  return AuditTable(std::move(schema), std::move(codes), std::move(y0), std::move(p_hat0),
                    std::move(p), std::move(theta));
}

AuditTable load_table(const std::string& path, const ColumnBindings& bindings) {
  return table_from_csv(read_csv(path), bindings);
}

double round10(double x) {
  if (!std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return std::strtod(buf, nullptr);
}

// shortest representation that parses back to the same double, so dataset
// CSVs round-trip bit-exactly
std::string format_double_exact(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

CsvTable table_to_csv(const AuditTable& table) {
  CsvTable csv;
  const Schema& schema = table.schema();
  for (std::size_t m = 0; m < schema.n_attributes(); ++m)
    csv.header.push_back(schema.attribute(m).name);
  csv.header.insert(csv.header.end(), {"y0", "p_hat0", "p", "theta"});
  csv.rows.resize(table.n_rows());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    auto& row = csv.rows[i];
    row.reserve(schema.n_attributes() + 4);
    for (std::size_t m = 0; m < schema.n_attributes(); ++m)
      row.push_back(schema.attribute(m).values[table.feature_codes()[m][i]]);
    row.push_back(table.y0()[i] ? "1" : "0");
    row.push_back(format_double_exact(table.p_hat0()[i]));
    row.push_back(format_double_exact(table.p()[i]));
    row.push_back(format_double_exact(table.theta()[i]));
  }
  return csv;
}

nlohmann::ordered_json subgroup_to_json(const Subgroup& sg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, values] : sg.included) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const std::string& v : values) arr.push_back(v);
    j[name] = std::move(arr);
  }
  return j;
}

Subgroup subgroup_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw DomainError("subgroup must be a JSON object");
  Subgroup sg;
  for (const auto& [name, values] : j.items()) {
    if (!values.is_array()) throw DomainError("subgroup values for '" + name + "' must be a list");
    std::set<std::string> set;
    for (const auto& v : values) {
      if (!v.is_string()) throw DomainError("subgroup values must be strings");
      set.insert(v.get<std::string>());
    }
    sg.included.emplace(name, std::move(set));
  }
  return sg;
}

Subgroup subgroup_from_string(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(std::string("cannot parse subgroup JSON: ") + e.what());
  }
  return subgroup_from_json(j);
}

nlohmann::ordered_json adjustments_to_json(const std::vector<Adjustment>& adjustments) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Adjustment& a : adjustments) {
    nlohmann::ordered_json j;
    j["iteration"] = a.iteration;
    j["kind"] = adjustment_kind_name(a.kind);
    j["subgroup"] = subgroup_to_json(a.subgroup);
    j["coefficient"] = round10(a.coefficient);
    j["mean_before"] = round10(a.mean_before);
    j["mean_after"] = round10(a.mean_after);
    arr.push_back(std::move(j));
  }
  return arr;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << text;
}

}  // namespace ijdi
