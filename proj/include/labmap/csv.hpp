#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace labmap::csv {

// One logical CSV record and the 1-based physical line it starts on.
struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// line breaks. Accepts LF or CRLF. Throws FormatError on an unterminated
// quote.
std::vector<Record> read(std::string_view text);

// Quote a field only when needed.
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

}  // namespace labmap::csv
