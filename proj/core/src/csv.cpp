#include "clost/csv.hpp"

#include <istream>
#include <ostream>

#include "clost/error.hpp"

namespace clost::csv {

std::vector<Record> read(std::istream& in) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;  // distinguishes "" line from empty line
  std::size_t line = 1;
  std::size_t record_start = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    current.line = record_start;
    records.push_back(std::move(current));
    current = Record{};
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;  // a comma implies a following field
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !current.fields.empty()) {
          end_record();
        }
        ++line;
        record_start = line;
        break;
      default:
        field_started = true;
        field.push_back(c);
        break;
    }
  }
  if (in_quotes) {
    throw ParseError(record_start, "unterminated quoted field");
  }
  if (field_started || !field.empty() || !current.fields.empty()) {
    end_record();
  }
  return records;
}

std::string escape(std::string_view field) {
  const bool needs_quotes =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace clost::csv
