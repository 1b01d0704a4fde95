#pragma once

#include <string>
#include <vector>

#include "ijdi/common.hpp"

namespace ijdi {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws DomainError when missing
  bool has_column(const std::string& name) const;
};

// RFC-4180-ish reader: quoted fields, doubled-quote escapes, optional CRLF.
// Every row must match the header width; violations report the 1-based data
// row number.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

void write_csv(const std::string& path, const CsvTable& table);
std::string csv_to_string(const CsvTable& table);

}  // namespace ijdi
