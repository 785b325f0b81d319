#include "labmap/csv.hpp"

#include "labmap/error.hpp"

namespace labmap::csv {

std::vector<Record> read(std::string_view text) {
  std::vector<Record> out;
  Record cur;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  cur.line = 1;

  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank physical line is not a record.
    if (!(cur.fields.size() == 1 && cur.fields[0].empty())) out.push_back(std::move(cur));
    cur = Record{};
    cur.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
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
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field_started = true;
        field.push_back(c);
    }
  }
  if (in_quotes) throw FormatError("unterminated quoted field starting near line " +
                                   std::to_string(cur.line));
  if (field_started || !field.empty() || !cur.fields.empty()) end_record();
  return out;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

}  // namespace labmap::csv
