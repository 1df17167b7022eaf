#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flowstab {

// Raised for malformed input files. Carries the 1-based line number when
// the problem is tied to a row.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace csv {

struct Table {
  std::vector<std::string> header;
  // Each row keeps its 1-based line number in the source file.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

// Plain comma-separated reader; no quoting beyond stripping surrounding
// double quotes. Blank lines are skipped.
Table read(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view line, char sep = ',');

// Requires the header to start with `expected` (case-sensitive).
void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::filesystem::path& path);

// Shortest representation that round-trips; empty string for NaN.
std::string format_double(double value);

// Parses a finite or non-finite double; nullopt on empty/non-numeric input.
std::optional<double> parse_double(std::string_view text);

// Writes text atomically enough for our purposes (truncate + write).
void write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace csv
}  // namespace flowstab
