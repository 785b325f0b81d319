#include <doctest.h>

#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "labmap/error.hpp"
#include "labmap/geoexport.hpp"
#include "labmap/random.hpp"
#include "support.hpp"

using namespace labmap;
using namespace labmap::geoexport;
namespace pt = boost::property_tree;

namespace {

ingest::GeoEvent riley() {
  ingest::GeoEvent e;
  e.raw.id = "ks-1";
  e.raw.date = {2004, 3, 9};
  e.raw.state = "KS";
  e.raw.county_name = "Riley";
  e.raw.event_type = "Abandoned dump site";
  e.raw.report_text = "drums & tubing found";
  e.fips = "20161";
  e.lat = 39.35;
  e.lon = -96.74;
  e.canonical_county = "Riley";
  return e;
}

pt::ptree parse_xml(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

}  // namespace

TEST_CASE("kml placemark") {
  const auto kml = write_kml({riley()});
  CHECK(kml.find("<coordinates>-96.74,39.35,0</coordinates>") != std::string::npos);
  CHECK(kml.find("<when>2004-03-09</when>") != std::string::npos);
  CHECK(kml.find("drums &amp; tubing") != std::string::npos);
  CHECK(kml.find("xmlns=\"http://www.opengis.net/kml/2.2\"") != std::string::npos);
  const auto tree = parse_xml(kml);
  const auto& pm = tree.get_child("kml.Document.Folder.Placemark");
  CHECK(pm.get<std::string>("<xmlattr>.id") == "ks-1");
  CHECK(pm.get<std::string>("description") == "drums & tubing found");
}

TEST_CASE("empty kml document") {
  const auto tree = parse_xml(write_kml({}));
  CHECK(tree.get_child("kml.Document.Folder").empty());
}

TEST_CASE("escaping") {
  CHECK(xml_escape("a<b>&\"'") == "a&lt;b&gt;&amp;&quot;&apos;");
  auto e = riley();
  e.raw.report_text = "<script>";
  CHECK(write_kml({e}).find("&lt;script&gt;") != std::string::npos);
}

TEST_CASE("kml over random events is well formed with lon,lat order") {
  const auto events = test::random_events(7, 100);
  const auto kml = write_kml(events);
  const auto tree = parse_xml(kml);
  std::size_t i = 0;
  for (const auto& [tag, node] : tree.get_child("kml.Document.Folder")) {
    REQUIRE(tag == "Placemark");
    REQUIRE(i < events.size());
    const auto coords = node.get<std::string>("Point.coordinates");
    double lon = 0, lat = 0, z = 1;
    char c1 = 0, c2 = 0;
    std::istringstream in(coords);
    in >> lon >> c1 >> lat >> c2 >> z;
    CHECK(lon == events[i].lon);
    CHECK(lat == events[i].lat);
    CHECK(z == 0);
    CHECK(node.get<std::string>("<xmlattr>.id") == events[i].id());
    CHECK(node.get<std::string>("TimeStamp.when") == events[i].date().to_string());
    ++i;
  }
  CHECK(i == events.size());
  CHECK(write_kml(events) == kml);
}

TEST_CASE("long descriptions are cut at a character boundary") {
  auto e = riley();
  e.raw.report_text = std::string(279, 'a') + "\xC3\xA9" + std::string(50, 'b');
  const auto tree = parse_xml(write_kml({e}));
  CHECK(tree.get<std::string>("kml.Document.Folder.Placemark.description") == std::string(279, 'a') + "...");
}

TEST_CASE("geojson event") {
  const auto text = write_geojson({riley()});
  CHECK(text.find("\"coordinates\":[-96.74,39.35]") != std::string::npos);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["type"] == "FeatureCollection");
  CHECK(j["features"][0]["properties"]["address"].is_null());
  CHECK(write_geojson({}) == R"({"type":"FeatureCollection","features":[]})");
}

TEST_CASE("geojson round trip") {
  const auto events = test::random_events(8, 100);
  const auto text = write_geojson(events);
  CHECK(read_geojson_events(text) == events);
  CHECK(write_geojson(read_geojson_events(text)) == text);
  CHECK_THROWS_AS(read_geojson_events("{"), FormatError);
  CHECK_THROWS_AS(read_geojson_events(R"({"type":"Feature"})"), FormatError);
}

TEST_CASE("layer join") {
  const std::string polygons =
      R"({"type":"FeatureCollection","features":[)"
      R"({"type":"Feature","properties":{"fips":"20161"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}},)"
      R"({"type":"Feature","properties":{"GEOID":"20035"},"geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1],[2,0]]]}},)"
      R"({"type":"Feature","id":20021,"geometry":{"type":"Polygon","coordinates":[[[4,0],[5,0],[5,1],[4,0]]]}}]})";
  const auto layer = thematic::build_layer({{"20161", 4}, {"20035", 1}, {"20021", 2}}, thematic::Metric::count,
                                           thematic::Scheme::equal_interval, 3, thematic::Ramp::grayscale);
  const auto j = nlohmann::json::parse(write_geojson_layer(layer, polygons));
  REQUIRE(j["features"].size() == 3);
  std::map<std::string, nlohmann::json> by;
  for (const auto& f : j["features"]) by[f["properties"]["fips"]] = f["properties"];
  CHECK(by["20161"]["value"] == 4.0);
  CHECK(by["20161"]["class"] == 2);
  CHECK(by["20035"]["class"] == 0);
  CHECK(by["20035"]["color"] == layer.colors[0]);
  CHECK(write_geojson_layer(layer, polygons) == write_geojson_layer(layer, polygons));

  const auto extra = thematic::build_layer({{"20161", 4}, {"20999", 1}, {"20997", 1}}, thematic::Metric::count,
                                           thematic::Scheme::quantile);
  try {
    write_geojson_layer(extra, polygons);
    FAIL("expected an error");
  } catch (const NotFoundError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("20999") != std::string::npos);
    CHECK(msg.find("20997") != std::string::npos);
    CHECK(msg.find("20161") == std::string::npos);
  }
}

TEST_CASE("timeline json") {
  thematic::TimeSeries y;
  y.scale = thematic::Scale::yearly;
  y.series = {{"2010", 4}};
  CHECK(write_timeline_json(y) == R"({"scale":"yearly","series":[["2010",4]]})");
  CHECK(write_timeline_json({}) == R"({"scale":"monthly","series":[]})");
  CHECK(write_timeline_json(y) == write_timeline_json(y));
}
