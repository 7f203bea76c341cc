#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nsp {

enum class FileFormat { Csv, Jsonl };

FileFormat parse_file_format(std::string_view name);

// RFC-4180-style reader: quoted fields, embedded commas/newlines, CRLF.
// line() reports the physical line a row started on, for error messages.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Returns false at end of input. Throws IoError on an unterminated quote.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const { return row_start_line_; }

 private:
  std::istream& in_;
  std::size_t current_line_ = 0;
  std::size_t row_start_line_ = 0;
};

std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Shortest-round-trip decimal rendering, stable across runs.
std::string format_double(double v);

}  // namespace nsp
