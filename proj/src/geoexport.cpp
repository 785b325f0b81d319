#include "labmap/geoexport.hpp"

#include <charconv>
#include <map>

#include <json.hpp>

#include "labmap/error.hpp"

namespace labmap::geoexport {

using nlohmann::ordered_json;

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

constexpr std::size_t kSnippetLength = 280;

// Cuts at a UTF-8 boundary.
std::string snippet(std::string_view text) {
  if (text.size() <= kSnippetLength) return std::string(text);
  std::size_t cut = kSnippetLength;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return std::string(text.substr(0, cut)) + "...";
}

}  // namespace

std::string write_kml(const std::vector<ingest::GeoEvent>& events, std::string_view document_name) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n";
  out += "<Document>\n";
  out += "<name>" + xml_escape(document_name) + "</name>\n";
  out += "<Folder>\n";
  for (const auto& e : events) {
    out += "<Placemark id=\"" + xml_escape(e.id()) + "\">\n";
    out += "<name>" + xml_escape(e.raw.event_type) + " - " + xml_escape(e.canonical_county) + "</name>\n";
    out += "<description>" + xml_escape(snippet(e.raw.report_text)) + "</description>\n";
    out += "<TimeStamp><when>" + e.date().to_string() + "</when></TimeStamp>\n";
    out += "<ExtendedData>";
    out += "<Data name=\"fips\"><value>" + xml_escape(e.fips) + "</value></Data>";
    out += "<Data name=\"event_type\"><value>" + xml_escape(e.raw.event_type) + "</value></Data>";
    out += "</ExtendedData>\n";
    out += "<Point><coordinates>" + shortest(e.lon) + "," + shortest(e.lat) +
           ",0</coordinates></Point>\n";
    out += "</Placemark>\n";
  }
  out += "</Folder>\n</Document>\n</kml>\n";
  return out;
}

std::string write_geojson(const std::vector<ingest::GeoEvent>& events) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  auto features = ordered_json::array();
  for (const auto& e : events) {
    ordered_json f;
    f["type"] = "Feature";
    f["id"] = e.id();
    f["geometry"] = {{"type", "Point"}, {"coordinates", {e.lon, e.lat}}};
    ordered_json p;
    p["id"] = e.id();
    p["date"] = e.date().to_string();
    p["state"] = e.raw.state;
    p["county"] = e.raw.county_name ? ordered_json(*e.raw.county_name) : ordered_json(nullptr);
    p["address"] = e.raw.address ? ordered_json(*e.raw.address) : ordered_json(nullptr);
    p["event_type"] = e.raw.event_type;
    p["report_text"] = e.raw.report_text;
    p["fips"] = e.fips;
    p["county_name"] = e.canonical_county;
    f["properties"] = std::move(p);
    features.push_back(std::move(f));
  }
  fc["features"] = std::move(features);
  return fc.dump();
}

std::vector<ingest::GeoEvent> read_geojson_events(std::string_view text) {
  std::vector<ingest::GeoEvent> out;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("type") != "FeatureCollection") throw FormatError("geojson: expected a FeatureCollection");
    for (const auto& f : j.at("features")) {
      const auto& g = f.at("geometry");
      if (g.at("type") != "Point") throw FormatError("geojson: event features must be Points");
      const auto& c = g.at("coordinates");
      const auto& p = f.at("properties");
      ingest::GeoEvent e;
      e.lon = c.at(0).get<double>();
      e.lat = c.at(1).get<double>();
      e.raw.id = p.at("id").get<std::string>();
      e.raw.date = Date::parse(p.at("date").get<std::string>());
      e.raw.state = p.at("state").get<std::string>();
      if (!p.at("county").is_null()) e.raw.county_name = p["county"].get<std::string>();
      if (!p.at("address").is_null()) e.raw.address = p["address"].get<std::string>();
      e.raw.event_type = p.at("event_type").get<std::string>();
      e.raw.report_text = p.at("report_text").get<std::string>();
      e.fips = p.at("fips").get<std::string>();
      e.canonical_county = p.at("county_name").get<std::string>();
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("geojson: ") + e.what());
  }
  return out;
}

namespace {

std::string feature_fips(const nlohmann::json& f) {
  if (f.contains("properties") && f["properties"].is_object()) {
    const auto& p = f["properties"];
    for (const char* key : {"fips", "FIPS", "GEOID"})
      if (p.contains(key) && p[key].is_string()) return p[key].get<std::string>();
  }
  if (f.contains("id")) {
    if (f["id"].is_string()) return f["id"].get<std::string>();
    if (f["id"].is_number_integer()) {
      std::string s = std::to_string(f["id"].get<long>());
      return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
    }
  }
  return {};
}

}  // namespace

std::string write_geojson_layer(const thematic::ChoroplethLayer& layer, std::string_view polygons) {
  nlohmann::json poly;
  try {
    poly = nlohmann::json::parse(polygons);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("polygon file: ") + e.what());
  }
  if (!poly.contains("features") || !poly["features"].is_array())
    throw FormatError("polygon file: expected a FeatureCollection");
  std::map<std::string, const nlohmann::json*> geometry;
  for (const auto& f : poly["features"]) {
    const auto fips = feature_fips(f);
    if (!fips.empty() && f.contains("geometry")) geometry.emplace(fips, &f["geometry"]);
  }
  std::string missing;
  for (const auto& [fips, v] : layer.values)
    if (!geometry.contains(fips)) missing += (missing.empty() ? "" : ", ") + fips;
  if (!missing.empty()) throw NotFoundError("fips missing from polygon file: " + missing);

  ordered_json fc;
  fc["type"] = "FeatureCollection";
  auto features = ordered_json::array();
  for (const auto& [fips, v] : layer.values) {
    const std::size_t cls = layer.class_of(v);
    ordered_json f;
    f["type"] = "Feature";
    f["id"] = fips;
    f["geometry"] = ordered_json::parse(geometry.at(fips)->dump());
    f["properties"] = {{"fips", fips},
                       {"value", v},
                       {"class", cls},
                       {"color", cls < layer.colors.size() ? layer.colors[cls] : std::string()}};
    features.push_back(std::move(f));
  }
  fc["features"] = std::move(features);
  return fc.dump();
}

std::string write_timeline_json(const thematic::TimeSeries& series) {
  ordered_json j;
  j["scale"] = thematic::to_string(series.scale);
  auto arr = ordered_json::array();
  for (const auto& [label, n] : series.series) arr.push_back(ordered_json::array({label, n}));
  j["series"] = std::move(arr);
  return j.dump();
}

}  // namespace labmap::geoexport
