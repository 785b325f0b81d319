#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "labmap/ingest.hpp"
#include "labmap/matrix.hpp"

namespace labmap::relevance {

struct CellKey {
  std::string fips;
  int year = 0;
  std::string topic;
  auto operator<=>(const CellKey&) const = default;
};

struct Cell {
  double proportion = 0.0;
  std::size_t n_reports = 0;
  bool operator==(const Cell&) const = default;
};

// Mean topic proportion per (county, year, topic).
class ProportionTable {
 public:
  void set(CellKey key, Cell cell);
  const Cell* find(const CellKey& key) const;

  const std::map<CellKey, Cell>& cells() const { return cells_; }
  std::set<std::string> topics() const;
  bool has_topic(std::string_view topic) const;

  // header fips,year,topic,proportion,n_reports
  static ProportionTable from_csv(std::string_view text);
  static ProportionTable load(const std::string& path);
  std::string to_csv() const;

  bool operator==(const ProportionTable&) const = default;

 private:
  std::map<CellKey, Cell> cells_;
};

// theta rows align with events; topic_labels names theta's columns.
ProportionTable build_table(const Matrix& theta, const std::vector<ingest::GeoEvent>& events,
                            const std::vector<std::string>& topic_labels);

struct MarkSet {
  std::string topic;
  double threshold = 0.0;
  int year = 0;
  std::set<std::string> fips;
};

// Counties whose proportion for the topic in the year is strictly above
// the threshold.
MarkSet mark_events(const ProportionTable& table, std::string_view topic, double threshold, int year);

enum class TimeBucket { year, month };

struct PosteriorKey {
  std::string fips;
  std::string bucket;  // "YYYY" or "YYYY-MM"
  auto operator<=>(const PosteriorKey&) const = default;
};

using LocationTimePosterior = std::map<PosteriorKey, double>;

// p(fips, bucket | topic) = theta mass of the cell / total theta mass.
LocationTimePosterior location_time_posterior(const Matrix& theta,
                                              const std::vector<ingest::GeoEvent>& events,
                                              std::size_t topic, TimeBucket bucket);

std::string bucket_label(const Date& date, TimeBucket bucket);

// Regional metrics for frequency filtering.
std::map<std::string, double> event_counts(const std::vector<ingest::GeoEvent>& events);
// Report-weighted mean proportion of the topic per county over all years.
std::map<std::string, double> mean_topic_proportion(const ProportionTable& table,
                                                    std::string_view topic);

struct Range {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

// Regions whose metric lies in [lo, hi].
std::set<std::string> frequency_filter(const std::map<std::string, double>& metric, Range range);

}  // namespace labmap::relevance
