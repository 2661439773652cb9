#include "xalign/csv.hpp"

#include <charconv>
#include <cstdio>

#include "xalign/errors.hpp"

namespace xalign {

CsvReader::CsvReader(const std::filesystem::path& path)
    : in_(path), path_(path.string()) {
  if (!in_.is_open()) throw io_error("cannot open " + path_);
}

bool CsvReader::next(std::vector<std::string>& fields) {
  std::string line;
  if (!std::getline(in_, line)) {
    if (in_.bad()) throw io_error("read failure in " + path_);
    return false;
  }
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  split_csv_line(line, fields);
  return true;
}

void split_csv_line(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double_field(const std::string& field, const std::string& file, size_t line) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw format_error(file + ":" + std::to_string(line) + ": not a number: '" + field + "'");
  return value;
}

long long parse_int_field(const std::string& field, const std::string& file, size_t line) {
  long long value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw format_error(file + ":" + std::to_string(line) + ": not an integer: '" + field + "'");
  return value;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace xalign
