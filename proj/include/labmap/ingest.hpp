#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labmap/date.hpp"

namespace labmap::ingest {

// A dated, typed seizure report as delivered by upstream extraction.
struct RawEvent {
  std::string id;
  Date date;
  std::string state;  // 2-letter postal code
  std::optional<std::string> county_name;
  std::optional<std::string> address;
  std::string event_type;
  std::string report_text;

  bool operator==(const RawEvent&) const = default;
};

// RawEvent resolved to a county; lat/lon are the county centroid.
struct GeoEvent {
  RawEvent raw;
  std::string fips;
  double lat = 0.0;
  double lon = 0.0;
  std::string canonical_county;

  const std::string& id() const { return raw.id; }
  const Date& date() const { return raw.date; }

  bool operator==(const GeoEvent&) const = default;
};

enum class RecordFormat { csv, jsonl };

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<RawEvent> events;
  std::vector<RowError> errors;
};

struct ParseOptions {
  DateRange study_window;
};

// Row-level problems (bad date, out-of-window, duplicate id, no location)
// are collected in ParseResult::errors. Undecodable input throws
// FormatError; a missing required column throws SchemaError.
ParseResult parse_records(std::string_view bytes, RecordFormat format,
                          const ParseOptions& options = {});

// Inverse of parse_records for the csv/jsonl event layouts.
std::string serialize_records(const std::vector<RawEvent>& events, RecordFormat format);

struct GazetteerEntry {
  std::string fips;
  std::string state;
  std::string county_name;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<std::string> zips;
};

// casefold, drop a trailing "county" word, collapse whitespace
std::string normalize_county_name(std::string_view name);

class Gazetteer {
 public:
  // csv with header fips,state,county_name,lat,lon,zips (zips ';'-separated).
  static Gazetteer load(std::string_view bytes);
  static Gazetteer load_file(const std::string& path);

  const GazetteerEntry* find_county(std::string_view state, std::string_view county) const;
  const GazetteerEntry* find_zip(std::string_view zip) const;
  const GazetteerEntry* find_fips(std::string_view fips) const;

  const std::vector<GazetteerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<GazetteerEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;  // "ST|normalized"
  std::unordered_map<std::string, std::size_t> by_zip_;
  std::unordered_map<std::string, std::size_t> by_fips_;
};

// Resolution order: county_name, then a 5-digit ZIP in the address.
// Throws UnresolvedLocationError.
GeoEvent georeference(const RawEvent& event, const Gazetteer& gazetteer);

struct GeoreferenceResult {
  std::vector<GeoEvent> events;
  std::vector<std::string> unresolved_ids;
};
GeoreferenceResult georeference_all(const std::vector<RawEvent>& events,
                                    const Gazetteer& gazetteer);

std::string read_file(const std::string& path);

}  // namespace labmap::ingest
