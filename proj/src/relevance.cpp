#include "labmap/relevance.hpp"

#include <charconv>
#include <cmath>

#include "labmap/csv.hpp"
#include "labmap/error.hpp"

namespace labmap::relevance {

void ProportionTable::set(CellKey key, Cell cell) {
  if (!(cell.proportion >= 0.0 && cell.proportion <= 1.0))
    throw ArgumentError("proportion outside [0, 1] for " + key.fips + "/" + std::to_string(key.year));
  cells_[std::move(key)] = cell;
}

const Cell* ProportionTable::find(const CellKey& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::set<std::string> ProportionTable::topics() const {
  std::set<std::string> out;
  for (const auto& [k, c] : cells_) out.insert(k.topic);
  return out;
}

bool ProportionTable::has_topic(std::string_view topic) const {
  for (const auto& [k, c] : cells_)
    if (k.topic == topic) return true;
  return false;
}

namespace {

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw FormatError("table line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

ProportionTable ProportionTable::from_csv(std::string_view text) {
  const auto records = csv::read(text);
  if (records.empty()) throw SchemaError("proportion table: missing header");
  const std::vector<std::string> expected = {"fips", "year", "topic", "proportion", "n_reports"};
  if (records.front().fields != expected)
    throw SchemaError("proportion table: header must be fips,year,topic,proportion,n_reports");
  ProportionTable t;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != 5) throw FormatError("table line " + std::to_string(r.line) + ": expected 5 fields");
    CellKey key{r.fields[0], parse_number<int>(r.fields[1], r.line, "year"), r.fields[2]};
    Cell cell{parse_number<double>(r.fields[3], r.line, "proportion"),
              parse_number<std::size_t>(r.fields[4], r.line, "n_reports")};
    if (t.find(key)) throw FormatError("table line " + std::to_string(r.line) + ": duplicate cell");
    t.set(std::move(key), cell);
  }
  return t;
}

ProportionTable ProportionTable::load(const std::string& path) {
  return from_csv(ingest::read_file(path));
}

std::string ProportionTable::to_csv() const {
  std::string out = "fips,year,topic,proportion,n_reports\n";
  char num[64];
  for (const auto& [k, c] : cells_) {
    auto [end, ec] = std::to_chars(num, num + sizeof num, c.proportion);
    out += csv::join({k.fips, std::to_string(k.year), k.topic, std::string(num, end),
                      std::to_string(c.n_reports)});
    out.push_back('\n');
  }
  return out;
}

ProportionTable build_table(const Matrix& theta, const std::vector<ingest::GeoEvent>& events,
                            const std::vector<std::string>& topic_labels) {
  if (theta.rows() != events.size()) throw ArgumentError("theta rows do not align with events");
  if (theta.cols() != topic_labels.size()) throw ArgumentError("topic label count != theta columns");
  struct Acc {
    std::vector<double> sum;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;
  for (std::size_t d = 0; d < events.size(); ++d) {
    auto& a = acc[{events[d].fips, events[d].date().year}];
    if (a.sum.empty()) a.sum.assign(theta.cols(), 0.0);
    const auto row = theta.row(d);
    for (std::size_t k = 0; k < row.size(); ++k) a.sum[k] += row[k];
    ++a.n;
  }
  ProportionTable t;
  for (const auto& [key, a] : acc)
    for (std::size_t k = 0; k < topic_labels.size(); ++k)
      t.set({key.first, key.second, topic_labels[k]},
            {std::min(1.0, a.sum[k] / static_cast<double>(a.n)), a.n});
  return t;
}

MarkSet mark_events(const ProportionTable& table, std::string_view topic, double threshold, int year) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in [0, 1]");
  if (!table.has_topic(topic)) throw NotFoundError("unknown topic '" + std::string(topic) + "'");
  MarkSet m{std::string(topic), threshold, year, {}};
  for (const auto& [k, c] : table.cells())
    if (k.topic == topic && k.year == year && c.proportion > threshold) m.fips.insert(k.fips);
  return m;
}

std::string bucket_label(const Date& date, TimeBucket bucket) {
  return bucket == TimeBucket::year ? std::to_string(date.year) : date.month_label();
}

LocationTimePosterior location_time_posterior(const Matrix& theta,
                                              const std::vector<ingest::GeoEvent>& events,
                                              std::size_t topic, TimeBucket bucket) {
  if (theta.rows() != events.size()) throw ArgumentError("theta rows do not align with events");
  if (topic >= theta.cols()) throw NotFoundError("topic index out of range");
  LocationTimePosterior post;
  double total = 0.0;
  for (std::size_t d = 0; d < events.size(); ++d) {
    const double x = theta(d, topic);
    post[{events[d].fips, bucket_label(events[d].date(), bucket)}] += x;
    total += x;
  }
  if (!(total > 0.0)) throw ArgumentError("degenerate topic: no probability mass");
  for (auto& [k, v] : post) v /= total;
  return post;
}

std::map<std::string, double> event_counts(const std::vector<ingest::GeoEvent>& events) {
  std::map<std::string, double> out;
  for (const auto& e : events) out[e.fips] += 1.0;
  return out;
}

std::map<std::string, double> mean_topic_proportion(const ProportionTable& table,
                                                    std::string_view topic) {
  if (!table.has_topic(topic)) throw NotFoundError("unknown topic '" + std::string(topic) + "'");
  std::map<std::string, std::pair<double, double>> acc;
  for (const auto& [k, c] : table.cells()) {
    if (k.topic != topic) continue;
    const double w = c.n_reports > 0 ? static_cast<double>(c.n_reports) : 1.0;
    acc[k.fips].first += w * c.proportion;
    acc[k.fips].second += w;
  }
  std::map<std::string, double> out;
  for (const auto& [f, a] : acc) out[f] = a.first / a.second;
  return out;
}

std::set<std::string> frequency_filter(const std::map<std::string, double>& metric, Range range) {
  if (std::isnan(range.lo) || std::isnan(range.hi) || range.lo > range.hi)
    throw ArgumentError("frequency range requires lo <= hi");
  std::set<std::string> out;
  for (const auto& [f, v] : metric)
    if (v >= range.lo && v <= range.hi) out.insert(f);
  return out;
}

}  // namespace labmap::relevance
