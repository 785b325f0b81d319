#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "labmap/error.hpp"
#include "labmap/random.hpp"
#include "labmap/service.hpp"
#include "labmap/store.hpp"
#include "labmap/synth.hpp"
#include "support.hpp"

using namespace labmap;
using namespace labmap::server;

namespace {

std::vector<ingest::GeoEvent> small_synth(std::size_t total, std::uint64_t seed) {
  corpus::SynthProfile p;
  p.total = total;
  p.n_counties = 12;
  p.n_types = 5;
  return corpus::synth_events(p, test::kansas(), seed).events;
}

ModelRecord random_model(const std::vector<ingest::GeoEvent>& events, std::size_t K, std::uint64_t seed) {
  Rng rng(seed);
  ModelRecord r;
  r.kind = "fixture";
  r.spec_json = "{}";
  r.model_json = "{}";
  for (std::size_t k = 0; k < K; ++k) {
    r.topic_labels.push_back("topic " + std::to_string(k));
    r.top_words.push_back({"w" + std::to_string(k)});
  }
  r.theta = Matrix(events.size(), K);
  const std::vector<double> alpha(K, 0.3);
  for (std::size_t d = 0; d < events.size(); ++d) {
    r.event_ids.push_back(events[d].id());
    const auto th = sample_dirichlet(alpha, rng);
    std::copy(th.begin(), th.end(), r.theta.row(d).begin());
  }
  return r;
}

std::vector<std::string> ids(const std::vector<ingest::GeoEvent>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) out.push_back(e.id());
  return out;
}

EventFilter random_filter(Rng& rng, const std::vector<ingest::GeoEvent>& events, bool with_topic) {
  EventFilter f;
  const auto& pick = events[uniform_index(rng, events.size())];
  if (uniform01(rng) < 0.5) f.from = Date::from_days(Date{2000, 1, 1}.to_days() + std::int64_t(uniform_index(rng, 4383)));
  if (uniform01(rng) < 0.5) {
    f.to = Date::from_days(Date{2000, 1, 1}.to_days() + std::int64_t(uniform_index(rng, 4383)));
    if (f.from && *f.to < *f.from) std::swap(*f.from, *f.to);
  }
  if (uniform01(rng) < 0.4) f.fips = pick.fips;
  if (uniform01(rng) < 0.4) f.event_type = pick.raw.event_type;
  if (with_topic && uniform01(rng) < 0.5) {
    f.topic = std::to_string(uniform_index(rng, 4));
    if (uniform01(rng) < 0.7) f.min_prop = uniform01(rng) * 0.6;
  }
  return f;
}

// Filter semantics written out predicate by predicate.
std::vector<std::string> brute_force(const std::vector<ingest::GeoEvent>& events, const EventFilter& f,
                                     const ModelRecord* model) {
  std::vector<const ingest::GeoEvent*> keep;
  for (const auto& e : events) {
    if (f.from && e.date() < *f.from) continue;
    if (f.to && *f.to < e.date()) continue;
    if (f.fips && e.fips != *f.fips) continue;
    if (f.event_type && e.raw.event_type != *f.event_type) continue;
    if (f.topic) {
      const auto it = std::find(model->event_ids.begin(), model->event_ids.end(), e.id());
      if (it == model->event_ids.end()) continue;
      const double p = model->theta(std::size_t(it - model->event_ids.begin()), std::stoul(*f.topic));
      if (!(p > f.min_prop.value_or(0.0))) continue;
    }
    keep.push_back(&e);
  }
  std::sort(keep.begin(), keep.end(), [](auto* a, auto* b) {
    return a->date() < b->date() || (a->date() == b->date() && a->id() < b->id());
  });
  std::vector<std::string> out;
  for (auto* e : keep) out.push_back(e->id());
  return out;
}

}  // namespace

TEST_CASE("ingest appends and rejects duplicates") {
  const auto dir = test::scratch_dir("store-ingest");
  const auto events = small_synth(40, 1);
  EventStore s(dir);
  CHECK(s.size() == 0);
  const std::vector<ingest::GeoEvent> three(events.begin(), events.begin() + 3);
  CHECK(s.ingest(three).appended == 3);
  CHECK(s.size() == 3);
  const auto again = s.ingest(three);
  CHECK(again.appended == 0);
  CHECK(again.duplicates == ids(three));
  const auto mixed = s.ingest(std::vector<ingest::GeoEvent>(events.begin() + 2, events.begin() + 6));
  CHECK(mixed.appended == 3);
  CHECK(mixed.duplicates == std::vector<std::string>{events[2].id()});
  CHECK(s.size() == 6);
  CHECK(s.indexes_consistent());
  auto twin = std::vector<ingest::GeoEvent>{events[10], events[10]};
  const auto dup = s.ingest(twin);
  CHECK(dup.appended == 1);
  CHECK(dup.duplicates.size() == 1);
}

TEST_CASE("failed log write leaves the store unchanged") {
  const auto dir = test::scratch_dir("store-fail");
  const auto events = small_synth(30, 2);
  EventStore s(dir);
  s.ingest(std::vector<ingest::GeoEvent>(events.begin(), events.begin() + 10));
  const auto log_before = ingest::read_file((dir / "events.jsonl").string());
  s.inject_fault(EventStore::Fault::fail_log_write);
  CHECK_THROWS_AS(s.ingest(std::vector<ingest::GeoEvent>(events.begin() + 10, events.end())), Error);
  CHECK(s.size() == 10);
  CHECK(ingest::read_file((dir / "events.jsonl").string()) == log_before);
  CHECK(s.indexes_consistent());
  s.inject_fault(EventStore::Fault::none);
  CHECK(s.ingest(std::vector<ingest::GeoEvent>(events.begin() + 10, events.end())).appended == 20);
  EventStore reopened(dir);
  CHECK(reopened.all_events() == s.all_events());
}

TEST_CASE("crash between log write and index update recovers on reopen") {
  const auto dir = test::scratch_dir("store-crash");
  const auto events = small_synth(30, 3);
  {
    EventStore s(dir);
    s.ingest(std::vector<ingest::GeoEvent>(events.begin(), events.begin() + 10));
    s.inject_fault(EventStore::Fault::crash_after_log_write);
    CHECK_THROWS(s.ingest(std::vector<ingest::GeoEvent>(events.begin() + 10, events.end())));
    CHECK(s.size() == 10);
  }
  EventStore reopened(dir);
  CHECK(reopened.size() == 30);
  CHECK(reopened.indexes_consistent());
  CHECK(ids(reopened.all_events()) == ids(events));
}

TEST_CASE("queries respect every predicate and survive reopen") {
  const auto dir = test::scratch_dir("store-query");
  const auto events = small_synth(600, 4);
  std::vector<std::string> results;
  {
    EventStore s(dir);
    s.ingest(events);
    const auto model_id = s.register_model(random_model(events, 4, 9));
    const auto model = s.model(model_id);
    Rng rng(77);
    for (int trial = 0; trial < 400; ++trial) {
      const auto f = random_filter(rng, events, true);
      const auto got = s.query(f);
      CHECK(ids(got) == brute_force(events, f, model.get()));
      for (const auto& e : got) CHECK(std::find(events.begin(), events.end(), e) != events.end());
      results.push_back(events_json(got));
    }
  }
  EventStore reopened(dir);
  CHECK(reopened.indexes_consistent());
  Rng rng(77);
  for (int trial = 0; trial < 400; ++trial)
    CHECK(events_json(reopened.query(random_filter(rng, events, true))) == results[std::size_t(trial)]);
}

TEST_CASE("half-year window") {
  const auto dir = test::scratch_dir("store-window");
  const auto events = small_synth(500, 5);
  EventStore s(dir);
  s.ingest(events);
  EventFilter f;
  f.from = Date{2010, 1, 1};
  f.to = Date{2010, 6, 30};
  const auto got = s.query(f);
  std::size_t expected = 0;
  for (const auto& e : events) expected += (e.date() >= *f.from && e.date() <= *f.to) ? 1 : 0;
  CHECK(got.size() == expected);
  for (const auto& e : got) CHECK((e.date().year == 2010 && e.date().month <= 6));
}

TEST_CASE("query argument checks") {
  const auto dir = test::scratch_dir("store-args");
  EventStore s(dir);
  s.ingest(small_synth(20, 6));
  EventFilter topic;
  topic.topic = "0";
  CHECK_THROWS_AS(s.query(topic), NotFoundError);
  EventFilter backwards;
  backwards.from = Date{2005, 1, 1};
  backwards.to = Date{2004, 1, 1};
  CHECK_THROWS_AS(s.query(backwards), ArgumentError);
  EventFilter bare;
  bare.min_prop = 0.1;
  CHECK_THROWS_AS(s.query(bare), ArgumentError);
  CHECK_THROWS_AS(s.model("model-9999"), NotFoundError);
  CHECK(s.latest_model() == nullptr);
}

TEST_CASE("zero threshold keeps every event with positive mass") {
  const auto dir = test::scratch_dir("store-zero");
  const auto events = small_synth(100, 7);
  EventStore s(dir);
  s.ingest(events);
  auto m = random_model(events, 3, 1);
  for (std::size_t d = 0; d < 10; ++d) {
    m.theta(d, 0) = 0.0;
    m.theta(d, 1) = 0.5;
    m.theta(d, 2) = 0.5;
  }
  s.register_model(m);
  EventFilter f;
  f.topic = "topic 0";
  f.min_prop = 0.0;
  CHECK(s.query(f).size() == 90);
}

TEST_CASE("models persist") {
  const auto dir = test::scratch_dir("store-models");
  const auto events = small_synth(50, 8);
  std::string first, second;
  ModelRecord original;
  {
    EventStore s(dir);
    s.ingest(events);
    original = random_model(events, 3, 2);
    first = s.register_model(original);
    second = s.register_model(random_model(events, 2, 3));
    CHECK(first != second);
    CHECK(s.latest_model()->id == second);
    auto named = random_model(events, 2, 3);
    named.id = first;
    CHECK_THROWS_AS(s.register_model(named), ArgumentError);
    auto bad = random_model(events, 2, 3);
    bad.event_ids.pop_back();
    CHECK_THROWS_AS(s.register_model(bad), ArgumentError);
  }
  EventStore s(dir);
  CHECK(s.model_ids() == std::vector<std::string>{first, second});
  CHECK(s.latest_model()->id == second);
  const auto m = s.model(first);
  CHECK(m->theta.data() == original.theta.data());
  CHECK(m->topic_labels == original.topic_labels);
  CHECK(m->resolve_topic("topic 2") == 2);
  CHECK(m->resolve_topic("1") == 1);
  CHECK_THROWS_AS(m->resolve_topic("7"), NotFoundError);
  CHECK_THROWS_AS(m->resolve_topic("nothing"), NotFoundError);
  CHECK(ids(s.model_events(*m)) == original.event_ids);
  CHECK(model_record_from_json(model_record_to_json(*m)).theta.data() == m->theta.data());
}

TEST_CASE("event json round trip") {
  for (const auto& e : small_synth(50, 9)) CHECK(event_from_json(event_to_json(e)) == e);
  CHECK_THROWS_AS(event_from_json("{"), FormatError);
}

TEST_CASE("topic filter agrees with fixture-table marks") {
  const auto dir = test::scratch_dir("store-table1");
  const auto table = relevance::ProportionTable::load(test::source_path("fixtures/table1.csv"));
  EventStore s(dir);
  const auto model_id = build_table_demo(s, table, test::kansas());
  CHECK(s.size() == 24);
  for (const auto& [key, cell] : table.cells()) {
    EventFilter f;
    f.topic = key.topic;
    f.min_prop = 0.02;
    f.fips = key.fips;
    f.from = Date{key.year, 1, 1};
    f.to = Date{key.year, 12, 31};
    f.model = model_id;
    const bool marked = relevance::mark_events(table, key.topic, 0.02, key.year).fips.contains(key.fips);
    CHECK(s.query(f).empty() == !marked);
  }
  CHECK(model_table(s, *s.model(model_id)).find({"20035", 2000, "Abandoned dump site"})->proportion == 0.0345);
}
