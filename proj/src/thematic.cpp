#include "labmap/thematic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "labmap/error.hpp"

namespace labmap::thematic {

const char* to_string(Metric m) { return m == Metric::count ? "count" : "topic_prop"; }
const char* to_string(Scheme s) { return s == Scheme::quantile ? "quantile" : "equal_interval"; }
const char* to_string(Scale s) { return s == Scale::monthly ? "monthly" : "yearly"; }

Metric parse_metric(std::string_view s) {
  if (s == "count") return Metric::count;
  if (s == "topic_prop") return Metric::topic_prop;
  throw ArgumentError("unknown metric '" + std::string(s) + "'");
}
Scheme parse_scheme(std::string_view s) {
  if (s == "quantile") return Scheme::quantile;
  if (s == "equal_interval") return Scheme::equal_interval;
  throw ArgumentError("unknown classification scheme '" + std::string(s) + "'");
}
Ramp parse_ramp(std::string_view s) {
  if (s == "sequential_red") return Ramp::sequential_red;
  if (s == "sequential_blue") return Ramp::sequential_blue;
  if (s == "grayscale") return Ramp::grayscale;
  throw ArgumentError("unknown color ramp '" + std::string(s) + "'");
}
Scale parse_scale(std::string_view s) {
  if (s == "monthly") return Scale::monthly;
  if (s == "yearly") return Scale::yearly;
  throw ArgumentError("unknown timeline scale '" + std::string(s) + "'");
}

RegionValues aggregate_counts(const std::vector<ingest::GeoEvent>& events, std::optional<int> year) {
  RegionValues out;
  for (const auto& e : events)
    if (!year || e.date().year == *year) out[e.fips] += 1.0;
  return out;
}

RegionValues aggregate_topic_proportion(const relevance::ProportionTable& table,
                                        std::string_view topic, std::optional<int> year) {
  if (!table.has_topic(topic)) throw NotFoundError("unknown topic '" + std::string(topic) + "'");
  if (!year) return relevance::mean_topic_proportion(table, topic);
  RegionValues out;
  for (const auto& [k, c] : table.cells())
    if (k.topic == topic && k.year == *year) out[k.fips] = c.proportion;
  return out;
}

std::vector<double> classify_breaks(const std::vector<double>& values, Scheme scheme,
                                    std::size_t n_classes) {
  if (values.empty()) throw ArgumentError("cannot classify an empty value set");
  if (n_classes < 1) throw ArgumentError("n_classes must be >= 1");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const std::size_t n = std::min(n_classes, uniq.size());
  const double lo = sorted.front(), hi = sorted.back();

  std::vector<double> breaks;
  for (std::size_t i = 1; i < n; ++i) {
    double b;
    if (scheme == Scheme::equal_interval) {
      b = lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(n);
    } else {
      // nearest rank: ceil(p * M), 1-based
      const std::size_t M = sorted.size();
      const std::size_t rank = (i * M + n - 1) / n;
      b = sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    // keep breaks strictly ascending and below the maximum so the top
    // value always lands in the last class
    if (b < hi && (breaks.empty() || b > breaks.back())) breaks.push_back(b);
  }
  return breaks;
}

std::size_t class_of(double value, const std::vector<double>& breaks) {
  return static_cast<std::size_t>(std::lower_bound(breaks.begin(), breaks.end(), value) - breaks.begin());
}

namespace {

struct Lab {
  double L, a, b;
};

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}
double lab_finv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3 * d * d * (t - 4.0 / 29.0);
}

std::array<int, 3> parse_hex(const std::string& hex) {
  unsigned r = 0, g = 0, b = 0;
  if (hex.size() != 7 || hex[0] != '#' || std::sscanf(hex.c_str() + 1, "%2x%2x%2x", &r, &g, &b) != 3)
    throw ArgumentError("bad color '" + hex + "'");
  return {static_cast<int>(r), static_cast<int>(g), static_cast<int>(b)};
}

Lab to_lab(const std::string& hex) {
  const auto c = parse_hex(hex);
  const double r = srgb_to_linear(c[0] / 255.0), g = srgb_to_linear(c[1] / 255.0),
               b = srgb_to_linear(c[2] / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::string to_hex(const Lab& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0, fz = fy - lab.b / 200.0;
  const double x = kXn * lab_finv(fx), y = kYn * lab_finv(fy), z = kZn * lab_finv(fz);
  const double rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto channel = [](double v) {
    const double s = linear_to_srgb(std::clamp(v, 0.0, 1.0));
    return static_cast<int>(std::lround(std::clamp(s, 0.0, 1.0) * 255.0));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", channel(rl), channel(gl), channel(bl));
  return buf;
}

struct RampSpec {
  const char* light;
  const char* dark;
  const char* single;  // color used when only one class exists
};

RampSpec ramp_spec(Ramp r) {
  switch (r) {
    case Ramp::sequential_red: return {"#FEE5D9", "#A50F15", "#FB6A4A"};
    case Ramp::sequential_blue: return {"#EFF3FF", "#08519C", "#6BAED6"};
    case Ramp::grayscale: return {"#EEEEEE", "#222222", "#777777"};
  }
  throw ArgumentError("unknown ramp");
}

}  // namespace

double lightness(const std::string& hex) { return to_lab(hex).L; }

std::vector<std::string> assign_palette(std::size_t n_classes, Ramp ramp) {
  if (n_classes < 1 || n_classes > 9) throw ArgumentError("n_classes must be within 1..9");
  const auto spec = ramp_spec(ramp);
  if (n_classes == 1) return {spec.single};
  const Lab a = to_lab(spec.light), b = to_lab(spec.dark);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n_classes; ++i) {
    if (i == 0) {
      out.emplace_back(spec.light);
    } else if (i + 1 == n_classes) {
      out.emplace_back(spec.dark);
    } else {
      const double s = static_cast<double>(i) / static_cast<double>(n_classes - 1);
      out.push_back(to_hex({a.L + s * (b.L - a.L), a.a + s * (b.a - a.a), a.b + s * (b.b - a.b)}));
    }
  }
  return out;
}

std::string ChoroplethLayer::to_json() const {
  nlohmann::ordered_json j;
  j["metric"] = thematic::to_string(metric);
  j["scheme"] = thematic::to_string(scheme);
  j["breaks"] = breaks;
  j["colors"] = colors;
  nlohmann::ordered_json v = nlohmann::ordered_json::object();
  for (const auto& [f, x] : values) v[f] = x;
  j["values"] = std::move(v);
  return j.dump();
}

ChoroplethLayer build_layer(RegionValues values, Metric metric, Scheme scheme,
                            std::size_t n_classes, Ramp ramp, std::optional<int> year) {
  ChoroplethLayer layer;
  layer.metric = metric;
  layer.scheme = scheme;
  layer.year = year;
  if (!values.empty()) {
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& [f, x] : values) v.push_back(x);
    layer.breaks = classify_breaks(v, scheme, std::min<std::size_t>(n_classes, 9));
    layer.colors = assign_palette(layer.breaks.size() + 1, ramp);
  }
  layer.values = std::move(values);
  return layer;
}

long TimeSeries::total() const {
  long t = 0;
  for (const auto& [label, n] : series) t += n;
  return t;
}

TimeSeries timeline_series(const std::vector<ingest::GeoEvent>& events, Scale scale,
                           std::optional<std::string> fips) {
  TimeSeries ts;
  ts.scale = scale;
  ts.fips = fips;
  std::map<int, long> counts;
  for (const auto& e : events) {
    if (fips && e.fips != *fips) continue;
    const int key = scale == Scale::monthly ? e.date().month_index() : e.date().year;
    ++counts[key];
  }
  if (counts.empty()) return ts;
  const int first = counts.begin()->first, last = counts.rbegin()->first;
  char buf[16];
  for (int key = first; key <= last; ++key) {
    if (scale == Scale::monthly)
      std::snprintf(buf, sizeof buf, "%04d-%02d", key / 12, key % 12 + 1);
    else
      std::snprintf(buf, sizeof buf, "%04d", key);
    auto it = counts.find(key);
    ts.series.emplace_back(buf, it == counts.end() ? 0L : it->second);
  }
  return ts;
}

}  // namespace labmap::thematic
