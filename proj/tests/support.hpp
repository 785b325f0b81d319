#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "labmap/ingest.hpp"
#include "labmap/random.hpp"

namespace labmap::test {

inline std::string source_path(const std::string& rel) { return std::string(LABMAP_SOURCE_DIR) + "/" + rel; }

inline const ingest::Gazetteer& kansas() {
  static const ingest::Gazetteer g = ingest::Gazetteer::load_file(source_path("data/gazetteer_ks.csv"));
  return g;
}

// A fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("labmap-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string random_text(Rng& rng, std::size_t n) {
  static const std::vector<std::string> pieces{"a", "b", " ", "<", ">", "&", "\"", "'", "\xC3\xA9", "\xE2\x82\xAC", "\n", "x1"};
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += pieces[uniform_index(rng, pieces.size())];
  return s;
}

// Events with markup-heavy text and coordinates anywhere on the globe.
inline std::vector<ingest::GeoEvent> random_events(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<ingest::GeoEvent> out;
  for (std::size_t i = 0; i < n; ++i) {
    ingest::GeoEvent e;
    e.raw.id = "ev-" + std::to_string(i) + random_text(rng, 3);
    e.raw.date = Date::from_days(Date{2000, 1, 1}.to_days() + std::int64_t(uniform_index(rng, 4383)));
    e.raw.state = "KS";
    if (uniform01(rng) < 0.7) e.raw.county_name = random_text(rng, 6);
    if (uniform01(rng) < 0.5) e.raw.address = random_text(rng, 12);
    e.raw.event_type = random_text(rng, 5);
    e.raw.report_text = random_text(rng, uniform_index(rng, 400));
    e.fips = std::to_string(20001 + 2 * uniform_index(rng, 105));
    e.lat = -90 + 180 * uniform01(rng);
    e.lon = -180 + 360 * uniform01(rng);
    e.canonical_county = random_text(rng, 4);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace labmap::test
