#include "crowdfair/csv.h"

#include <charconv>
#include <cmath>
#include <system_error>

#include "crowdfair/error.h"

namespace crowdfair::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto piece = line.substr(start, comma == std::string_view::npos
                                              ? std::string_view::npos
                                              : comma - start);
    fields.emplace_back(trim(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

Reader::Reader(const std::filesystem::path& path, std::vector<std::string> expected_header)
    : in_(path), path_(path.string()), columns_(expected_header.size()) {
  if (!in_) throw Error("cannot open " + path_);
  std::string header;
  while (std::getline(in_, header)) {
    ++line_;
    if (!trim(header).empty()) break;
  }
  // A UTF-8 byte order mark may precede the header.
  if (header.starts_with("\xEF\xBB\xBF")) header.erase(0, 3);
  if (split(header) != expected_header) {
    throw Error(where("expected header '" + join(expected_header) + "', got '" +
                      std::string(trim(header)) + "'"));
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (trim(raw).empty()) continue;
    fields = split(raw);
    if (fields.size() != columns_) {
      throw Error(where("expected " + std::to_string(columns_) + " fields, got " +
                        std::to_string(fields.size())));
    }
    return true;
  }
  return false;
}

std::string Reader::where(std::string_view message) const {
  return path_ + ":" + std::to_string(line_) + ": " + std::string(message);
}

int parse_binary(std::string_view field, const Reader& reader, std::string_view column) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  throw Error(reader.where(std::string(column) + " must be 0 or 1, got '" +
                           std::string(field) + "'"));
}

double parse_double(std::string_view field, const Reader& reader, std::string_view column) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw Error(reader.where("invalid number for " + std::string(column) + ": '" +
                             std::string(field) + "'"));
  }
  return value;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace crowdfair::csv
