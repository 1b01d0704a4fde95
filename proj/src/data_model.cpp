#include "ijdi/data_model.hpp"

#include <sstream>

namespace ijdi {

Schema::Schema(std::vector<Attribute> attrs) : attrs_(std::move(attrs)) {
  value_index_.resize(attrs_.size());
  for (std::size_t m = 0; m < attrs_.size(); ++m) {
    const Attribute& a = attrs_[m];
    if (a.name.empty()) throw SchemaError("attribute with empty name");
    if (a.values.empty()) throw SchemaError("attribute '" + a.name + "' has no values");
    if (a.values.size() > 64)
      throw SchemaError("attribute '" + a.name + "' has more than 64 values; discretize coarser");
    if (!index_.emplace(a.name, m).second)
      throw SchemaError("duplicate attribute '" + a.name + "'");
    for (std::size_t v = 0; v < a.values.size(); ++v) {
      if (!value_index_[m].emplace(a.values[v], static_cast<std::uint16_t>(v)).second)
        throw SchemaError("duplicate value '" + a.values[v] + "' in attribute '" + a.name + "'");
    }
  }
}

std::size_t Schema::attribute_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw SchemaError("unknown attribute '" + name + "'");
  return it->second;
}

std::uint16_t Schema::value_code(std::size_t attr, const std::string& value) const {
  auto it = value_index_[attr].find(value);
  if (it == value_index_[attr].end())
    throw SchemaError("unknown value '" + value + "' for attribute '" + attrs_[attr].name + "'");
  return it->second;
}

bool Schema::has_attribute(const std::string& name) const { return index_.count(name) != 0; }

void Subgroup::validate(const Schema& schema) const {
  for (const auto& [name, values] : included) {
    std::size_t m = schema.attribute_index(name);
    if (values.empty())
      throw SchemaError("subgroup includes no values for attribute '" + name + "'");
    for (const std::string& v : values) schema.value_code(m, v);
  }
}

std::string Subgroup::describe() const {
  std::ostringstream out;
  bool first_attr = true;
  for (const auto& [name, values] : included) {
    if (!first_attr) out << ";";
    first_attr = false;
    out << name << "=[";
    bool first = true;
    for (const std::string& v : values) {
      if (!first) out << "|";
      first = false;
      out << v;
    }
    out << "]";
  }
  return out.str();
}

namespace {

void check_probability_column(const std::vector<double>& col, const char* what) {
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (!(col[i] >= 0.0 && col[i] <= 1.0)) {
      throw DomainError(std::string(what) + " out of [0,1] at row " + std::to_string(i) + ": " +
                        std::to_string(col[i]));
    }
  }
}

}  // namespace

AuditTable::AuditTable(Schema schema, std::vector<std::vector<std::uint16_t>> feature_codes,
                       std::vector<std::uint8_t> y0, std::vector<double> p_hat0,
                       std::vector<double> p, std::vector<double> theta,
                       std::optional<std::vector<std::uint8_t>> recommendation_override)
    : schema_(std::move(schema)),
      feature_codes_(std::move(feature_codes)),
      y0_(std::move(y0)),
      p_hat0_(std::move(p_hat0)),
      p_(std::move(p)),
      theta_(std::move(theta)),
      rec_override_(std::move(recommendation_override)) {
  const std::size_t n = y0_.size();
  if (n == 0) throw SchemaError("empty table");
  if (feature_codes_.size() != schema_.n_attributes())
    throw SchemaError("feature column count does not match schema");
  for (std::size_t m = 0; m < feature_codes_.size(); ++m) {
    if (feature_codes_[m].size() != n) throw SchemaError("feature column length mismatch");
    const std::size_t domain = schema_.attribute(m).values.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (feature_codes_[m][i] >= domain)
        throw SchemaError("feature code out of domain for attribute '" +
                          schema_.attribute(m).name + "' at row " + std::to_string(i));
    }
  }
  if (p_hat0_.size() != n || p_.size() != n || theta_.size() != n)
    throw SchemaError("column length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (y0_[i] > 1) throw DomainError("outcome not in {0,1} at row " + std::to_string(i));
  }
  check_probability_column(p_hat0_, "prediction");
  check_probability_column(p_, "base rate");
  check_probability_column(theta_, "threshold");
  if (rec_override_) {
    if (rec_override_->size() != n) throw SchemaError("recommendation override length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if ((*rec_override_)[i] > 1)
        throw DomainError("recommendation not in {0,1} at row " + std::to_string(i));
    }
  }
}

std::vector<std::uint8_t> AuditTable::recommendations() const {
  if (rec_override_) return *rec_override_;
  return binarize(p_hat0_, theta_);
}

AuditTable AuditTable::with_theta(std::vector<double> theta) const {
  return AuditTable(schema_, feature_codes_, y0_, p_hat0_, p_, std::move(theta));
}

AuditTable AuditTable::with_p(std::vector<double> p) const {
  return AuditTable(schema_, feature_codes_, y0_, p_hat0_, std::move(p), theta_, rec_override_);
}

AuditTable AuditTable::with_recommendation_override(std::vector<std::uint8_t> rec) const {
  return AuditTable(schema_, feature_codes_, y0_, p_hat0_, p_, theta_, std::move(rec));
}

std::vector<std::uint8_t> binarize(std::span<const double> p_hat0, std::span<const double> theta) {
  if (p_hat0.size() != theta.size()) throw SchemaError("binarize: length mismatch");
  std::vector<std::uint8_t> out(p_hat0.size());
  for (std::size_t i = 0; i < p_hat0.size(); ++i) {
    if (!(p_hat0[i] >= 0.0 && p_hat0[i] <= 1.0) || !(theta[i] >= 0.0 && theta[i] <= 1.0))
      throw DomainError("binarize: value out of [0,1] at row " + std::to_string(i));
    out[i] = p_hat0[i] > theta[i] ? 1 : 0;
  }
  return out;
}

AuditFrame build_frame(const AuditTable& table, Side side, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  const std::uint8_t wanted = side == Side::Positive ? 1 : 0;
  const std::vector<std::uint8_t> rec = table.recommendations();

  AuditFrame frame;
  frame.side = side;
  frame.lambda = lambda;
  frame.schema = &table.schema();
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    if (table.y0()[i] == wanted) frame.rows.push_back(static_cast<std::uint32_t>(i));
  }
  if (frame.rows.empty()) {
    throw DomainError(side == Side::Negative ? "no negatives (y0 = 0) in table"
                                             : "no positives (y0 = 1) in table");
  }
  const std::size_t n = frame.rows.size();
  frame.codes.resize(table.schema().n_attributes());
  for (std::size_t m = 0; m < frame.codes.size(); ++m) {
    frame.codes[m].resize(n);
    for (std::size_t k = 0; k < n; ++k) frame.codes[m][k] = table.feature_codes()[m][frame.rows[k]];
  }
  frame.y_scan.resize(n);
  frame.p.resize(n);
  CompensatedSum sum_rec, sum_p;
  for (std::size_t k = 0; k < n; ++k) {
    frame.y_scan[k] = rec[frame.rows[k]];
    frame.p[k] = table.p()[frame.rows[k]];
    sum_rec.add(frame.y_scan[k]);
    sum_p.add(frame.p[k]);
  }
  frame.p_bar_b = sum_rec.value() / static_cast<double>(n);
  frame.p_bar = sum_p.value() / static_cast<double>(n);
  frame.p_scan_uncensored.resize(n);
  frame.p_scan_censored.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double u = frame.p_bar_b + lambda * (frame.p[k] - frame.p_bar);
    frame.p_scan_uncensored[k] = u;
    frame.p_scan_censored[k] = std::clamp(u, 0.0, 1.0);
  }
  return frame;
}

std::vector<std::uint8_t> membership(const Subgroup& subgroup, const AuditFrame& frame) {
  subgroup.validate(*frame.schema);
  const std::size_t n = frame.size();
  std::vector<std::uint8_t> member(n, 1);
  for (const auto& [name, values] : subgroup.included) {
    const std::size_t m = frame.schema->attribute_index(name);
    std::uint64_t mask = 0;
    for (const std::string& v : values) mask |= 1ULL << frame.schema->value_code(m, v);
    const auto& col = frame.codes[m];
    for (std::size_t k = 0; k < n; ++k) {
      if (!((mask >> col[k]) & 1ULL)) member[k] = 0;
    }
  }
  return member;
}

std::vector<std::uint8_t> membership(const Subgroup& subgroup, const AuditTable& table) {
  subgroup.validate(table.schema());
  const std::size_t n = table.n_rows();
  std::vector<std::uint8_t> member(n, 1);
  for (const auto& [name, values] : subgroup.included) {
    const std::size_t m = table.schema().attribute_index(name);
    std::uint64_t mask = 0;
    for (const std::string& v : values) mask |= 1ULL << table.schema().value_code(m, v);
    const auto& col = table.feature_codes()[m];
    for (std::size_t k = 0; k < n; ++k) {
      if (!((mask >> col[k]) & 1ULL)) member[k] = 0;
    }
  }
  return member;
}

GroupStats group_stats(const AuditFrame& frame, std::span<const std::uint8_t> member) {
  if (member.size() != frame.size()) throw SchemaError("membership length mismatch");
  CompensatedSum rate_in, rate_out, p_in, p_out;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (member[k]) {
      ++n_in;
      rate_in.add(frame.y_scan[k]);
      p_in.add(frame.p[k]);
    } else {
      ++n_out;
      rate_out.add(frame.y_scan[k]);
      p_out.add(frame.p[k]);
    }
  }
  if (n_in == 0 || n_out == 0)
    throw DomainError("degenerate subgroup: empty side within the frame");
  GroupStats s;
  s.n_in = n_in;
  s.n_out = n_out;
  s.rate_in = rate_in.value() / static_cast<double>(n_in);
  s.rate_out = rate_out.value() / static_cast<double>(n_out);
  s.p_in = p_in.value() / static_cast<double>(n_in);
  s.p_out = p_out.value() / static_cast<double>(n_out);
  return s;
}

GroupStats group_stats(const AuditFrame& frame, const Subgroup& subgroup) {
  return group_stats(frame, membership(subgroup, frame));
}

}  // namespace ijdi
