#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "labmap/ingest.hpp"
#include "labmap/relevance.hpp"

namespace labmap::thematic {

enum class Metric { count, topic_prop };
enum class Scheme { equal_interval, quantile };
enum class Ramp { sequential_red, sequential_blue, grayscale };
enum class Scale { monthly, yearly };

const char* to_string(Metric m);
const char* to_string(Scheme s);
const char* to_string(Scale s);
Metric parse_metric(std::string_view s);
Scheme parse_scheme(std::string_view s);
Ramp parse_ramp(std::string_view s);
Scale parse_scale(std::string_view s);

using RegionValues = std::map<std::string, double>;

// Events per county, optionally restricted to one calendar year.
RegionValues aggregate_counts(const std::vector<ingest::GeoEvent>& events,
                              std::optional<int> year = std::nullopt);
// Proportion table cells for a topic: the year's cell, or the
// report-weighted mean over all years.
RegionValues aggregate_topic_proportion(const relevance::ProportionTable& table,
                                        std::string_view topic, std::optional<int> year = std::nullopt);

// Interior class breaks, strictly ascending. n_classes is capped at the
// number of distinct values.
std::vector<double> classify_breaks(const std::vector<double>& values, Scheme scheme,
                                    std::size_t n_classes);

// Class index of a value: the number of breaks strictly below it.
std::size_t class_of(double value, const std::vector<double>& breaks);

// n colors, light to dark, as "#RRGGBB".
std::vector<std::string> assign_palette(std::size_t n_classes, Ramp ramp);

// CIE L* of a "#RRGGBB" color.
double lightness(const std::string& hex);

struct ChoroplethLayer {
  Metric metric = Metric::count;
  Scheme scheme = Scheme::quantile;
  std::optional<int> year;  // nullopt = all years
  std::vector<double> breaks;
  std::vector<std::string> colors;  // breaks.size() + 1
  RegionValues values;

  std::size_t class_of(double value) const { return thematic::class_of(value, breaks); }
  std::string to_json() const;
};

ChoroplethLayer build_layer(RegionValues values, Metric metric, Scheme scheme,
                            std::size_t n_classes = 5, Ramp ramp = Ramp::sequential_red,
                            std::optional<int> year = std::nullopt);

struct TimeSeries {
  Scale scale = Scale::monthly;
  std::vector<std::pair<std::string, long>> series;
  std::optional<std::string> fips;

  long total() const;
};

// Calendar buckets from the first to the last event, zero buckets kept.
TimeSeries timeline_series(const std::vector<ingest::GeoEvent>& events, Scale scale,
                           std::optional<std::string> fips = std::nullopt);

}  // namespace labmap::thematic
