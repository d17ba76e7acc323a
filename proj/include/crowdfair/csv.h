#ifndef CROWDFAIR_CSV_H_
#define CROWDFAIR_CSV_H_

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace crowdfair::csv {

/// Minimal reader for the comma-separated files used by this project: a
/// mandatory header row, no quoting, LF or CRLF line endings. Blank lines are
/// skipped.
class Reader {
 public:
  /// Opens `path` and checks that the header matches `expected_header`
  /// exactly (after trimming whitespace around each field).
  Reader(const std::filesystem::path& path, std::vector<std::string> expected_header);

  /// Reads the next row into `fields`. Returns false at end of file. Throws
  /// when the row has the wrong number of fields.
  bool next(std::vector<std::string>& fields);

  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

  /// "path:line: message", for error reporting.
  std::string where(std::string_view message) const;

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t columns_;
  std::size_t line_ = 0;
};

std::vector<std::string> split(std::string_view line);

/// Parses "0"/"1".
int parse_binary(std::string_view field, const Reader& reader, std::string_view column);
double parse_double(std::string_view field, const Reader& reader, std::string_view column);

/// Opens `path` for writing, throwing on failure.
std::ofstream open_output(const std::filesystem::path& path);

/// Shortest round-trippable decimal representation.
std::string format_double(double value);

}  // namespace crowdfair::csv

#endif  // CROWDFAIR_CSV_H_
