#include "msrisk/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msrisk/state.hpp"

namespace msrisk {

std::optional<State> parse_state(std::string_view token) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (token.size() != 1) return std::nullopt;
  switch (token.front()) {
    case 'P': case 'p': case '1': return State::P;
    case 'D': case 'd': case '2': return State::D;
    case 'S': case 's': case '3': return State::S;
    case 'W': case 'w': case '4': return State::W;
    default: return std::nullopt;
  }
}

namespace csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<std::size_t> Table::find(std::string_view column) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) return i;
  return std::nullopt;
}

std::size_t Table::require(std::string_view column) const {
  if (auto pos = find(column)) return *pos;
  std::string have;
  for (const auto& h : header) have += (have.empty() ? "" : ",") + h;
  throw CsvError("missing column '" + std::string(column) + "' (have: " + have + ")");
}

std::vector<std::string> split_line(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table parse_table(std::istream& in, const std::string& source_name) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw CsvError(source_name + ": line " + std::to_string(line_no) + " has " +
                     std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw CsvError(source_name + ": empty file");
  return t;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return parse_table(in, path.string());
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw CsvError("failed to format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view token, std::string_view what) {
  token = trim(token);
  if (token == "nan" || token == "NaN" || token == "NA") return std::nan("");
  double v = 0.0;
  const char* first = token.data();
  if (!token.empty() && token.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw CsvError("cannot parse " + std::string(what) + " from '" + std::string(token) + "'");
  }
  return v;
}

long long parse_int(std::string_view token, std::string_view what) {
  token = trim(token);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw CsvError("cannot parse integer " + std::string(what) + " from '" + std::string(token) +
                   "'");
  }
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CsvError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw CsvError("write failed for " + path.string());
}

}  // namespace csv
}  // namespace msrisk
