#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "labmap/ingest.hpp"
#include "labmap/lda.hpp"

namespace labmap::corpus {

// Marginals for a synthetic seizure dataset. The defaults reproduce the
// Kansas 2000-2011 totals: 4942 seizures over 104 counties.
struct SynthProfile {
  std::size_t total = 4942;
  int first_year = 2000;
  int last_year = 2011;
  std::size_t n_counties = 104;
  std::size_t n_types = 50;
  double zipf_exponent = 1.0;
  double doc_len_mean = 40.0;
  std::size_t vocabulary_size = 600;
  std::string state = "KS";
  // Relative weight per year; empty means a built-in rise-and-fall curve.
  std::vector<double> year_weights;

  // {total, years:[start,end], n_counties, n_types, zipf_exponent,
  //  doc_len_mean}; unknown keys rejected.
  static SynthProfile from_json(std::string_view text);
};

struct SynthDataset {
  std::vector<ingest::GeoEvent> events;
  lda::LdaModel generator;  // the per-type word distributions used for text
  std::vector<std::string> type_labels;
};

// Deterministic given (profile, gazetteer, seed). Events are sorted by
// date then id.
SynthDataset synth_events(const SynthProfile& profile, const ingest::Gazetteer& gazetteer,
                          std::uint64_t seed);

// Human-readable labels for the synthetic event types; the first is
// "Abandoned dump site".
std::vector<std::string> event_type_labels(std::size_t n);

}  // namespace labmap::corpus
