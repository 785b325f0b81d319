#include "labmap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "labmap/error.hpp"
#include "labmap/random.hpp"

namespace labmap::corpus {

namespace {

constexpr const char* kTypeNames[] = {
    "Abandoned dump site",     "Anhydrous ammonia theft",  "Red phosphorus lab",
    "Shake and bake lab",      "Mobile vehicle lab",        "Hotel room lab",
    "Residential lab",         "Outbuilding lab",           "Chemical storage site",
    "Precursor purchase",      "Glassware seizure",         "Finished product seizure",
    "Lithium strip extraction", "Hydrogen chloride generator", "Burn pit residue",
};

constexpr const char* kLexicon[] = {
    "anhydrous", "ammonia",   "pseudoephedrine", "ephedrine",  "lithium",    "batteries",
    "phosphorus", "iodine",   "acetone",         "toluene",    "ether",      "coleman",
    "fuel",       "tank",     "tanks",           "propane",    "hose",       "tubing",
    "glassware",  "flask",    "funnel",          "coffee",     "filters",    "bottle",
    "bottles",    "generator", "hydrochloric",   "acid",       "lye",        "drain",
    "cleaner",    "salt",     "residue",         "sludge",     "trash",      "bags",
    "dump",       "ditch",    "roadside",        "field",      "creek",      "pasture",
    "barn",       "shed",     "garage",          "trailer",    "vehicle",    "truck",
    "trunk",      "motel",    "hotel",           "room",       "residence",  "kitchen",
    "basement",   "deputies", "officers",        "agents",     "warrant",    "search",
    "arrest",     "suspect",  "suspects",        "seized",     "recovered",  "discovered",
    "reported",   "fumes",    "odor",            "hazardous",  "materials",  "cleanup",
    "contractor", "meth",     "methamphetamine", "lab",        "cook",       "cooking",
    "precursor",  "purchase", "pharmacy",        "logbook",    "pills",      "blister",
    "packs",      "strips",   "scale",           "baggies",    "product",    "grams",
    "ounces",     "burn",     "pit",             "ashes",      "stolen",     "nurse",
    "fertilizer", "farm",     "cooperative",     "valve",      "brass",      "fitting",
};

std::vector<double> default_year_weights(int first, int last) {
  // Rise to a peak a third of the way in, then decay.
  std::vector<double> w;
  const double span = std::max(1, last - first);
  const double peak = span / 3.0;
  for (int y = first; y <= last; ++y) {
    const double x = (y - first - peak) / (span / 2.5);
    w.push_back(std::exp(-0.5 * x * x) + 0.15);
  }
  return w;
}

std::vector<std::string> synth_vocabulary(std::size_t n) {
  std::vector<std::string> words;
  for (const char* w : kLexicon) {
    if (words.size() == n) break;
    words.emplace_back(w);
  }
  char buf[16];
  for (std::size_t i = 0; words.size() < n; ++i) {
    std::snprintf(buf, sizeof buf, "lex%04zu", i);
    words.emplace_back(buf);
  }
  return words;
}

}  // namespace

std::vector<std::string> event_type_labels(std::size_t n) {
  std::vector<std::string> out;
  constexpr std::size_t named = std::size(kTypeNames);
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    if (i < named) {
      out.emplace_back(kTypeNames[i]);
    } else {
      std::snprintf(buf, sizeof buf, "Lab type %02zu", i + 1);
      out.emplace_back(buf);
    }
  }
  return out;
}

SynthProfile SynthProfile::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth profile: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("synth profile must be a json object");
  static const std::set<std::string> known = {"total",        "years",         "n_counties",
                                              "n_types",      "zipf_exponent", "doc_len_mean",
                                              "vocabulary_size", "state",      "year_weights"};
  SynthProfile p;
  try {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.contains(it.key())) throw SchemaError("synth profile: unknown key '" + it.key() + "'");
    if (j.contains("total")) p.total = j["total"].get<std::size_t>();
    if (j.contains("years")) {
      const auto y = j["years"].get<std::vector<int>>();
      if (y.size() != 2) throw SchemaError("synth profile: years must be [start, end]");
      p.first_year = y[0];
      p.last_year = y[1];
    }
    if (j.contains("n_counties")) p.n_counties = j["n_counties"].get<std::size_t>();
    if (j.contains("n_types")) p.n_types = j["n_types"].get<std::size_t>();
    if (j.contains("zipf_exponent")) p.zipf_exponent = j["zipf_exponent"].get<double>();
    if (j.contains("doc_len_mean")) p.doc_len_mean = j["doc_len_mean"].get<double>();
    if (j.contains("vocabulary_size")) p.vocabulary_size = j["vocabulary_size"].get<std::size_t>();
    if (j.contains("state")) p.state = j["state"].get<std::string>();
    if (j.contains("year_weights")) p.year_weights = j["year_weights"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("synth profile: ") + e.what());
  }
  return p;
}

SynthDataset synth_events(const SynthProfile& profile, const ingest::Gazetteer& gazetteer,
                          std::uint64_t seed) {
  if (profile.total < 1) throw ArgumentError("synth: total must be >= 1");
  if (profile.n_counties < 1) throw ArgumentError("synth: n_counties must be >= 1");
  if (profile.n_counties > profile.total)
    throw ArgumentError("synth: n_counties exceeds total event count");
  if (profile.n_types < 1) throw ArgumentError("synth: n_types must be >= 1");
  if (profile.first_year > profile.last_year) throw ArgumentError("synth: years reversed");
  if (profile.vocabulary_size < 2) throw ArgumentError("synth: vocabulary_size must be >= 2");

  std::vector<const ingest::GazetteerEntry*> counties;
  for (const auto& e : gazetteer.entries())
    if (e.state == profile.state) counties.push_back(&e);
  if (profile.n_counties > counties.size())
    throw ArgumentError("synth: requested " + std::to_string(profile.n_counties) +
                        " counties but gazetteer has " + std::to_string(counties.size()) +
                        " in " + profile.state);
  std::sort(counties.begin(), counties.end(),
            [](const auto* a, const auto* b) { return a->fips < b->fips; });

  Rng rng(seed);

  // Fisher-Yates with our own index draw, then Zipf weights by rank.
  for (std::size_t i = counties.size(); i > 1; --i)
    std::swap(counties[i - 1], counties[uniform_index(rng, i)]);
  counties.resize(profile.n_counties);
  std::vector<double> zipf(profile.n_counties);
  for (std::size_t i = 0; i < zipf.size(); ++i)
    zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), profile.zipf_exponent);

  // Every chosen county gets one event; the rest follow the Zipf law.
  std::vector<std::size_t> county_of(profile.total);
  for (std::size_t i = 0; i < profile.n_counties; ++i) county_of[i] = i;
  for (std::size_t i = profile.n_counties; i < profile.total; ++i)
    county_of[i] = sample_categorical(zipf, rng);

  const int n_years = profile.last_year - profile.first_year + 1;
  std::vector<double> year_w = profile.year_weights.empty()
                                   ? default_year_weights(profile.first_year, profile.last_year)
                                   : profile.year_weights;
  if (static_cast<int>(year_w.size()) != n_years)
    throw ArgumentError("synth: year_weights length != number of years");

  // Per-type word distributions: sparse Dirichlet draws.
  SynthDataset out;
  out.type_labels = event_type_labels(profile.n_types);
  lda::LdaModel& gen = out.generator;
  gen.k = static_cast<int>(profile.n_types);
  gen.alpha = 0.1;
  gen.eta = 0.05;
  gen.vocabulary = synth_vocabulary(profile.vocabulary_size);
  gen.beta = Matrix(profile.n_types, profile.vocabulary_size);
  const std::vector<double> eta(profile.vocabulary_size, gen.eta);
  for (std::size_t t = 0; t < profile.n_types; ++t) {
    auto row = sample_dirichlet(eta, rng);
    // keep every entry positive so the generator is a valid model
    double s = 0.0;
    for (double& x : row) s += (x += 1e-9);
    for (std::size_t w = 0; w < row.size(); ++w) gen.beta(t, w) = row[w] / s;
  }

  struct Draft {
    ingest::GeoEvent ev;
    std::int64_t day;
    std::size_t seq;
  };
  std::vector<Draft> drafts;
  drafts.reserve(profile.total);
  const double boost = 5.0;
  for (std::size_t i = 0; i < profile.total; ++i) {
    const auto* county = counties[county_of[i]];
    const int year = profile.first_year + static_cast<int>(sample_categorical(year_w, rng));
    const int year_days = is_leap_year(year) ? 366 : 365;
    const auto day = Date{year, 1, 1}.to_days() +
                     static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(year_days)));
    const std::size_t type = uniform_index(rng, profile.n_types);

    std::vector<double> prior(profile.n_types, gen.alpha);
    prior[type] += boost;
    const auto theta = sample_dirichlet(prior, rng);
    const std::size_t len = std::max<std::uint32_t>(1, sample_poisson(profile.doc_len_mean, rng));
    const auto tokens = lda::sample_tokens(gen.beta, theta, len, rng);

    ingest::GeoEvent ev;
    ev.raw.date = Date::from_days(day);
    ev.raw.state = county->state;
    // One in five reports carries only a street address with ZIP.
    const bool address_only = !county->zips.empty() && uniform_index(rng, 5) == 0;
    const std::size_t house = 100 + uniform_index(rng, 9900);
    if (address_only) {
      const auto& zip = county->zips[uniform_index(rng, county->zips.size())];
      ev.raw.address = std::to_string(house) + " County Road, " + county->state + " " + zip;
    } else {
      ev.raw.county_name = county->county_name;
    }
    ev.raw.event_type = out.type_labels[type];
    std::string text;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) text.push_back(' ');
      text += gen.vocabulary[tokens[t]];
    }
    ev.raw.report_text = std::move(text);
    ev.fips = county->fips;
    ev.lat = county->lat;
    ev.lon = county->lon;
    ev.canonical_county = county->county_name;
    drafts.push_back({std::move(ev), day, i});
  }

  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
    return a.day != b.day ? a.day < b.day : a.seq < b.seq;
  });
  char id[32];
  out.events.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::snprintf(id, sizeof id, "syn-%06zu", i + 1);
    drafts[i].ev.raw.id = id;
    out.events.push_back(std::move(drafts[i].ev));
  }
  return out;
}

}  // namespace labmap::corpus
