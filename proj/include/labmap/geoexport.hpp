#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "labmap/ingest.hpp"
#include "labmap/thematic.hpp"

namespace labmap::geoexport {

// KML 2.2 document, one Placemark per event in input order.
std::string write_kml(const std::vector<ingest::GeoEvent>& events,
                      std::string_view document_name = "Seizure events");

std::string xml_escape(std::string_view text);

// FeatureCollection of Point features carrying every event field.
std::string write_geojson(const std::vector<ingest::GeoEvent>& events);
std::vector<ingest::GeoEvent> read_geojson_events(std::string_view text);

// Joins a layer against county polygons (a FeatureCollection whose
// features carry properties.fips, properties.GEOID or a top-level id).
// Throws NotFoundError naming every layer fips missing from the polygons.
std::string write_geojson_layer(const thematic::ChoroplethLayer& layer, std::string_view polygons);

// {"scale":...,"series":[[label,count],...]}
std::string write_timeline_json(const thematic::TimeSeries& series);

}  // namespace labmap::geoexport
