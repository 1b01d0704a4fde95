#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ijdi/common.hpp"

namespace ijdi {

// Declared domain of one categorical attribute. Value order is the order of
// first appearance at load time and fixes the integer coding.
struct Attribute {
  std::string name;
  std::vector<std::string> values;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Attribute> attrs);

  std::size_t n_attributes() const { return attrs_.size(); }
  const Attribute& attribute(std::size_t m) const { return attrs_[m]; }
  const std::vector<Attribute>& attributes() const { return attrs_; }

  // Throws SchemaError for unknown names/values.
  std::size_t attribute_index(const std::string& name) const;
  std::uint16_t value_code(std::size_t attr, const std::string& value) const;

  bool has_attribute(const std::string& name) const;

 private:
  std::vector<Attribute> attrs_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::map<std::string, std::uint16_t>> value_index_;
};

// Intersectional subgroup: attribute name -> non-empty set of included
// values. Attributes absent from the map include all of their values.
struct Subgroup {
  std::map<std::string, std::set<std::string>> included;

  void validate(const Schema& schema) const;  // throws SchemaError

  // Canonical one-line form, attributes in name order.
  std::string describe() const;

  bool operator==(const Subgroup& other) const { return included == other.included; }
};

// Row-level dataset under audit. Columns are immutable after construction;
// the `with_*` helpers return modified copies.
class AuditTable {
 public:
  AuditTable(Schema schema, std::vector<std::vector<std::uint16_t>> feature_codes,
             std::vector<std::uint8_t> y0, std::vector<double> p_hat0, std::vector<double> p,
             std::vector<double> theta,
             std::optional<std::vector<std::uint8_t>> recommendation_override = std::nullopt);

  std::size_t n_rows() const { return y0_.size(); }
  const Schema& schema() const { return schema_; }
  const std::vector<std::vector<std::uint16_t>>& feature_codes() const { return feature_codes_; }
  const std::vector<std::uint8_t>& y0() const { return y0_; }
  const std::vector<double>& p_hat0() const { return p_hat0_; }
  const std::vector<double>& p() const { return p_; }
  const std::vector<double>& theta() const { return theta_; }
  bool has_recommendation_override() const { return rec_override_.has_value(); }

  // Binarized recommendations: override column if present, else
  // binarize(p_hat0, theta).
  std::vector<std::uint8_t> recommendations() const;

  AuditTable with_theta(std::vector<double> theta) const;  // recomputes recommendations
  AuditTable with_p(std::vector<double> p) const;
  AuditTable with_recommendation_override(std::vector<std::uint8_t> rec) const;

 private:
  Schema schema_;
  std::vector<std::vector<std::uint16_t>> feature_codes_;  // per attribute, length n
  std::vector<std::uint8_t> y0_;
  std::vector<double> p_hat0_;
  std::vector<double> p_;
  std::vector<double> theta_;
  std::optional<std::vector<std::uint8_t>> rec_override_;
};

// One-sided view used by the scans: the rows with the requested original
// outcome, their recommendations as scan outcomes, and the base-rate-adjusted
// scan expectations. Immutable to callers; the engine works on private copies.
struct AuditFrame {
  Side side = Side::Negative;
  double lambda = 0.0;
  const Schema* schema = nullptr;
  std::vector<std::uint32_t> rows;                        // indices into the parent table
  std::vector<std::vector<std::uint16_t>> codes;          // per attribute, frame-local
  std::vector<std::uint8_t> y_scan;                       // recommendation per frame row
  std::vector<double> p;                                  // base rate per frame row
  std::vector<double> p_scan_uncensored;
  std::vector<double> p_scan_censored;
  double p_bar_b = 0.0;  // mean recommendation over the frame
  double p_bar = 0.0;    // mean base rate over the frame

  std::size_t size() const { return rows.size(); }
};

struct GroupStats {
  double rate_in = 0.0;   // mean y_scan inside S (FPR or TPR by side)
  double rate_out = 0.0;  // mean y_scan outside S
  double p_in = 0.0;      // mean base rate inside S
  double p_out = 0.0;     // mean base rate outside S
  std::size_t n_in = 0;
  std::size_t n_out = 0;
};

// rec_i = 1 iff p_hat0_i > theta_i (strict; ties map to 0).
std::vector<std::uint8_t> binarize(std::span<const double> p_hat0, std::span<const double> theta);

AuditFrame build_frame(const AuditTable& table, Side side, double lambda);

// Frame-local membership flags for a subgroup (conjunction over attributes).
std::vector<std::uint8_t> membership(const Subgroup& subgroup, const AuditFrame& frame);

// Table-level membership flags.
std::vector<std::uint8_t> membership(const Subgroup& subgroup, const AuditTable& table);

GroupStats group_stats(const AuditFrame& frame, const Subgroup& subgroup);
GroupStats group_stats(const AuditFrame& frame, std::span<const std::uint8_t> member);

}  // namespace ijdi
