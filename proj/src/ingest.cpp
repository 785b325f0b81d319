#include "labmap/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "labmap/csv.hpp"
#include "labmap/error.hpp"

namespace labmap::ingest {

namespace {

using nlohmann::json;

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t j = 1; j < len; ++j) {
      const auto cc = static_cast<unsigned char>(s[i + j]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

std::string_view strip_bom(std::string_view s) {
  if (s.size() >= 3 && s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
  return s;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::optional<std::string> optional_field(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  return t;
}

constexpr const char* kColumns[] = {"id",      "date",       "state",      "county",
                                    "address", "event_type", "report_text"};

struct RowFields {
  std::string id, date, state, county, address, event_type, report_text;
};

// Shared validation for both formats. Returns an error message or empty.
std::string build_event(const RowFields& f, const ParseOptions& options,
                        std::unordered_set<std::string>& seen, RawEvent& out) {
  out = RawEvent{};
  out.id = trim(f.id);
  if (out.id.empty()) return "empty id";
  try {
    out.date = Date::parse(trim(f.date));
  } catch (const FormatError& e) {
    return e.what();
  }
  if (!options.study_window.contains(out.date))
    return "date " + out.date.to_string() + " outside study window";
  out.state = trim(f.state);
  std::transform(out.state.begin(), out.state.end(), out.state.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  out.county_name = optional_field(f.county);
  out.address = optional_field(f.address);
  if (!out.county_name && !out.address) return "neither county nor address present";
  out.event_type = trim(f.event_type);
  out.report_text = f.report_text;
  if (!seen.insert(out.id).second) return "duplicate id '" + out.id + "'";
  return {};
}

ParseResult parse_csv(std::string_view text, const ParseOptions& options) {
  ParseResult result;
  const auto records = csv::read(text);
  if (records.empty()) throw SchemaError("missing csv header row");
  const auto& header = records.front().fields;
  std::size_t index[7];
  for (std::size_t c = 0; c < 7; ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == kColumns[c]; });
    if (it == header.end()) throw SchemaError(std::string("missing column '") + kColumns[c] + "'");
    index[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      result.errors.push_back({rec.line, "expected " + std::to_string(header.size()) +
                                             " fields, got " +
                                             std::to_string(rec.fields.size())});
      continue;
    }
    RowFields f{rec.fields[index[0]], rec.fields[index[1]], rec.fields[index[2]],
                rec.fields[index[3]], rec.fields[index[4]], rec.fields[index[5]],
                rec.fields[index[6]]};
    RawEvent ev;
    if (auto err = build_event(f, options, seen, ev); !err.empty())
      result.errors.push_back({rec.line, std::move(err)});
    else
      result.events.push_back(std::move(ev));
  }
  return result;
}

ParseResult parse_jsonl(std::string_view text, const ParseOptions& options) {
  ParseResult result;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (nl == text.size()) break;
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      result.errors.push_back({line_no, std::string("malformed json: ") + e.what()});
      continue;
    }
    if (!obj.is_object()) {
      result.errors.push_back({line_no, "expected a json object"});
      continue;
    }
    auto get = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = obj.find(key);
      if (it == obj.end() || it->is_null()) {
        if (required) throw SchemaError(std::string("missing field '") + key + "' on line " +
                                        std::to_string(line_no));
        return std::string{};
      }
      if (!it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    RowFields f;
    std::string* slots[] = {&f.id,      &f.date,       &f.state,      &f.county,
                            &f.address, &f.event_type, &f.report_text};
    bool typed = true;
    for (std::size_t c = 0; c < 7; ++c) {
      const bool required = !(c == 3 || c == 4);
      auto v = get(kColumns[c], required);
      if (!v) {
        result.errors.push_back({line_no, std::string("field '") + kColumns[c] +
                                              "' is not a string"});
        typed = false;
        break;
      }
      *slots[c] = std::move(*v);
    }
    if (!typed) continue;
    RawEvent ev;
    if (auto err = build_event(f, options, seen, ev); !err.empty())
      result.errors.push_back({line_no, std::move(err)});
    else
      result.events.push_back(std::move(ev));
    if (nl == text.size()) break;
  }
  return result;
}

}  // namespace

ParseResult parse_records(std::string_view bytes, RecordFormat format,
                          const ParseOptions& options) {
  if (!valid_utf8(bytes)) throw FormatError("input is not valid UTF-8");
  bytes = strip_bom(bytes);
  return format == RecordFormat::csv ? parse_csv(bytes, options) : parse_jsonl(bytes, options);
}

std::string serialize_records(const std::vector<RawEvent>& events, RecordFormat format) {
  std::string out;
  if (format == RecordFormat::csv) {
    out = "id,date,state,county,address,event_type,report_text\n";
    for (const auto& e : events) {
      out += csv::join({e.id, e.date.to_string(), e.state, e.county_name.value_or(""),
                        e.address.value_or(""), e.event_type, e.report_text});
      out.push_back('\n');
    }
    return out;
  }
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["date"] = e.date.to_string();
    j["state"] = e.state;
    j["county"] = e.county_name ? json(*e.county_name) : json(nullptr);
    j["address"] = e.address ? json(*e.address) : json(nullptr);
    j["event_type"] = e.event_type;
    j["report_text"] = e.report_text;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::string normalize_county_name(std::string_view name) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  if (words.size() > 1 && words.back() == "county") words.pop_back();
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

namespace {

std::string name_key(std::string_view state, std::string_view county) {
  std::string key;
  for (char c : trim(state)) key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  key.push_back('|');
  key += normalize_county_name(county);
  return key;
}

double parse_coordinate(const std::string& s, std::size_t line, const char* what) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw FormatError("gazetteer line " + std::to_string(line) + ": bad " + what + " '" + t + "'");
  return v;
}

}  // namespace

Gazetteer Gazetteer::load(std::string_view bytes) {
  if (!valid_utf8(bytes)) throw FormatError("gazetteer is not valid UTF-8");
  const auto records = csv::read(strip_bom(bytes));
  if (records.empty()) throw SchemaError("gazetteer: missing header");
  const auto& header = records.front().fields;
  static constexpr const char* kCols[] = {"fips", "state", "county_name", "lat", "lon", "zips"};
  std::size_t idx[6];
  for (std::size_t c = 0; c < 6; ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == kCols[c]; });
    if (it == header.end()) throw SchemaError(std::string("gazetteer: missing column '") + kCols[c] + "'");
    idx[c] = static_cast<std::size_t>(it - header.begin());
  }

  Gazetteer g;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw FormatError("gazetteer line " + std::to_string(rec.line) + ": wrong field count");
    GazetteerEntry e;
    e.fips = trim(rec.fields[idx[0]]);
    if (e.fips.size() != 5 || !std::all_of(e.fips.begin(), e.fips.end(), ::isdigit))
      throw FormatError("gazetteer line " + std::to_string(rec.line) + ": fips must be 5 digits");
    e.state = trim(rec.fields[idx[1]]);
    e.county_name = trim(rec.fields[idx[2]]);
    e.lat = parse_coordinate(rec.fields[idx[3]], rec.line, "lat");
    e.lon = parse_coordinate(rec.fields[idx[4]], rec.line, "lon");
    if (!(e.lat >= -90.0 && e.lat <= 90.0) || !(e.lon >= -180.0 && e.lon <= 180.0))
      throw FormatError("gazetteer line " + std::to_string(rec.line) +
                        ": coordinate out of range for fips " + e.fips);
    std::stringstream zs(rec.fields[idx[5]]);
    for (std::string z; std::getline(zs, z, ';');)
      if (auto t = trim(z); !t.empty()) e.zips.push_back(t);

    const std::size_t pos = g.entries_.size();
    if (!g.by_fips_.emplace(e.fips, pos).second)
      throw FormatError("gazetteer: duplicate fips " + e.fips);
    if (!g.by_name_.emplace(name_key(e.state, e.county_name), pos).second)
      throw FormatError("gazetteer: duplicate county name " + e.state + "/" + e.county_name);
    for (const auto& z : e.zips) {
      auto [it, inserted] = g.by_zip_.emplace(z, pos);
      if (!inserted && it->second != pos)
        throw FormatError("gazetteer: zip " + z + " maps to more than one fips");
    }
    g.entries_.push_back(std::move(e));
  }
  return g;
}

Gazetteer Gazetteer::load_file(const std::string& path) { return load(read_file(path)); }

const GazetteerEntry* Gazetteer::find_county(std::string_view state, std::string_view county) const {
  auto it = by_name_.find(name_key(state, county));
  return it == by_name_.end() ? nullptr : &entries_[it->second];
}

const GazetteerEntry* Gazetteer::find_zip(std::string_view zip) const {
  auto it = by_zip_.find(std::string(zip));
  return it == by_zip_.end() ? nullptr : &entries_[it->second];
}

const GazetteerEntry* Gazetteer::find_fips(std::string_view fips) const {
  auto it = by_fips_.find(std::string(fips));
  return it == by_fips_.end() ? nullptr : &entries_[it->second];
}

namespace {

// 5-digit runs not embedded in longer digit runs, optionally followed by
// a ZIP+4 suffix. Returned right-to-left: a ZIP trails the street
// number in US addresses.
std::vector<std::string> zip_candidates(std::string_view address) {
  std::vector<std::string> found;
  std::size_t i = 0;
  while (i < address.size()) {
    if (!std::isdigit(static_cast<unsigned char>(address[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < address.size() && std::isdigit(static_cast<unsigned char>(address[j]))) ++j;
    if (j - i == 5) found.emplace_back(address.substr(i, 5));
    i = j;
  }
  std::reverse(found.begin(), found.end());
  return found;
}

}  // namespace

GeoEvent georeference(const RawEvent& event, const Gazetteer& gazetteer) {
  const GazetteerEntry* entry = nullptr;
  if (event.county_name) entry = gazetteer.find_county(event.state, *event.county_name);
  if (!entry && event.address) {
    for (const auto& zip : zip_candidates(*event.address)) {
      if ((entry = gazetteer.find_zip(zip))) break;
    }
  }
  if (!entry) throw UnresolvedLocationError(event.id);
  GeoEvent out;
  out.raw = event;
  out.fips = entry->fips;
  out.lat = entry->lat;
  out.lon = entry->lon;
  out.canonical_county = entry->county_name;
  return out;
}

GeoreferenceResult georeference_all(const std::vector<RawEvent>& events,
                                    const Gazetteer& gazetteer) {
  GeoreferenceResult r;
  r.events.reserve(events.size());
  for (const auto& e : events) {
    try {
      r.events.push_back(georeference(e, gazetteer));
    } catch (const UnresolvedLocationError& err) {
      r.unresolved_ids.push_back(err.event_id());
    }
  }
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace labmap::ingest
