#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace xalign {

// Minimal CSV: comma-separated, no quoting (source ids and numbers never
// contain commas), tolerant of trailing \r. Row errors carry 1-based line
// numbers.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  // Fills `fields` with the next row; returns false at end of file.
  bool next(std::vector<std::string>& fields);

  size_t line() const noexcept { return line_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  size_t line_ = 0;
};

double parse_double_field(const std::string& field, const std::string& file, size_t line);
long long parse_int_field(const std::string& field, const std::string& file, size_t line);

// Round-trip exact decimal rendering ("%.17g").
std::string format_double(double v);

void split_csv_line(const std::string& line, std::vector<std::string>& fields);

}  // namespace xalign
