#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ijdi/csv.hpp"
#include "ijdi/ijdi_engine.hpp"
#include "ijdi/mitigation.hpp"
#include "ijdi/significance.hpp"

namespace ijdi {

inline constexpr const char* kEngineVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

struct ColumnBindings {
  std::vector<std::string> features;
  std::string outcome;
  std::string prediction;
  std::optional<std::string> base_rate;  // fit in-process when absent
  std::optional<std::string> threshold_column;
  std::optional<double> threshold_constant;
};

// Loads and validates a CSV into an AuditTable. Attribute domains are the
// observed values in order of first appearance. Without a base-rate column,
// per-record base rates are fit with the built-in logistic model over the
// bound features. Rejects rather than coerces; messages carry 1-based data
// row numbers.
AuditTable load_table(const std::string& path, const ColumnBindings& bindings);
AuditTable table_from_csv(const CsvTable& csv, const ColumnBindings& bindings);

// Round-trippable CSV form (feature columns, y0, p_hat0, p, theta).
CsvTable table_to_csv(const AuditTable& table);

// --- report helpers ---------------------------------------------------------

// Rounds to 10 significant digits; every float written into a report goes
// through this so identical runs emit identical bytes.
double round10(double x);

// Shortest decimal form that parses back to the same double (for dataset
// columns, which must round-trip exactly).
std::string format_double_exact(double x);

nlohmann::ordered_json subgroup_to_json(const Subgroup& sg);
Subgroup subgroup_from_json(const nlohmann::ordered_json& j);
Subgroup subgroup_from_string(const std::string& text);  // JSON object literal

nlohmann::ordered_json adjustments_to_json(const std::vector<Adjustment>& adjustments);

void write_text_file(const std::string& path, const std::string& text);

// Entry point used by both main() and the tests. Returns the process exit
// status: 0 success, 1 domain error, 2 usage error.
int run_command(const std::vector<std::string>& args);

}  // namespace ijdi
