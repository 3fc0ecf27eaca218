#pragma once

// Minimal CSV plumbing shared by every file format in the toolkit. Fields are
// never quoted: identifiers and numbers only.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msrisk::csv {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based file line of each row (header is line 1).
  std::vector<std::size_t> line_numbers;

  /// Column position by name, or nullopt.
  std::optional<std::size_t> find(std::string_view column) const;
  /// Column position by name; throws CsvError naming the file's columns.
  std::size_t require(std::string_view column) const;
};

std::vector<std::string> split_line(std::string_view line, char sep = ',');

Table read_table(const std::filesystem::path& path);
Table parse_table(std::istream& in, const std::string& source_name);

/// Shortest representation that parses back to the identical double.
std::string format_double(double value);

double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

/// Writes `content` to `path`, throwing on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace msrisk::csv
