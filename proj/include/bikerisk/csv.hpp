#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace bikerisk::csv {

// RFC 4180 style record splitter: quoted fields may contain the delimiter and
// doubled quotes. Embedded newlines are not supported.
std::vector<std::string> split_record(std::string_view line, char delim = ',');

// Reads the next non-empty line, stripping a trailing '\r'.
std::optional<std::string> next_line(std::istream& in, std::size_t& line_no);

std::string quote_if_needed(std::string_view field, char delim = ',');

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Formats a double with enough digits to round-trip.
std::string format_double(double v);

class Writer {
 public:
  explicit Writer(std::ostream& out, char delim = ',') : out_(out), delim_(delim) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  char delim_;
};

}  // namespace bikerisk::csv
