#pragma once

// RFC-4180 CSV tables and JSON files, with round-trip float formatting.

#include <string>
#include <vector>

#include "json.hpp"

namespace ruinsim::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws SchemaError when absent.
  std::size_t column(const std::string& name) const;
};

/// Shortest decimal form that parses back to the same double; "inf", "-inf", "nan".
std::string format_double(double x);
double parse_double(const std::string& s);

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// Two-space indented JSON with a trailing newline.
void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace ruinsim::io
