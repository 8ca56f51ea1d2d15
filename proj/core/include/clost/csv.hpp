#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// Minimal RFC 4180 reader/writer: quoted fields, escaped quotes, embedded
// commas and newlines. Records keep the line number they started on.
namespace clost::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based
};

/// Reads every record in the stream. Throws clost::ParseError on an
/// unterminated quoted field at EOF.
std::vector<Record> read(std::istream& in);

/// Quotes a field if it contains a comma, quote, or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);

}  // namespace clost::csv
