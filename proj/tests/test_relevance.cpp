#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labmap/error.hpp"
#include "labmap/random.hpp"
#include "labmap/relevance.hpp"
#include "support.hpp"

using namespace labmap;
using namespace labmap::relevance;

namespace {

const std::string kDump = "Abandoned dump site";

ProportionTable table1() { return ProportionTable::load(test::source_path("fixtures/table1.csv")); }

std::set<std::string> names(const MarkSet& m) {
  std::set<std::string> out;
  for (const auto& f : m.fips) out.insert(test::kansas().find_fips(f)->county_name);
  return out;
}

ingest::GeoEvent event_at(std::string fips, Date date, std::string id) {
  ingest::GeoEvent e;
  e.raw.id = std::move(id);
  e.raw.date = date;
  e.raw.state = "KS";
  e.fips = std::move(fips);
  return e;
}

Matrix rows(std::initializer_list<std::vector<double>> values) {
  Matrix m(values.size(), values.begin()->size());
  std::size_t r = 0;
  for (const auto& v : values) {
    std::copy(v.begin(), v.end(), m.row(r).begin());
    ++r;
  }
  return m;
}

struct RandomSetup {
  Matrix theta;
  std::vector<ingest::GeoEvent> events;
  std::vector<std::string> labels;
};

RandomSetup random_setup(Rng& rng, std::size_t n_events, std::size_t K) {
  RandomSetup s;
  s.theta = Matrix(n_events, K);
  const std::vector<double> alpha(K, 0.5);
  for (std::size_t k = 0; k < K; ++k) s.labels.push_back("t" + std::to_string(k));
  for (std::size_t d = 0; d < n_events; ++d) {
    const auto th = sample_dirichlet(alpha, rng);
    std::copy(th.begin(), th.end(), s.theta.row(d).begin());
    const auto& entry = test::kansas().entries()[uniform_index(rng, 6)];
    s.events.push_back(event_at(entry.fips, Date{2000 + int(uniform_index(rng, 3)), 1 + int(uniform_index(rng, 12)), 1},
                                "e" + std::to_string(d)));
  }
  return s;
}

}  // namespace

TEST_CASE("fixture table values load exactly") {
  const auto t = table1();
  CHECK(t.cells().size() == 24);
  const auto* c = t.find({"20035", 2000, kDump});
  REQUIRE(c);
  CHECK(c->proportion == 0.0345);
  CHECK(t.find({"20155", 2008, kDump})->proportion == 0.0527);
  CHECK(t.find({"20035", 2008, kDump})->proportion == 0.0001);
  CHECK(t.find({"20021", 2010, kDump})->proportion == 0.0333);
  CHECK(t.topics() == std::set<std::string>{kDump});
}

TEST_CASE("marks at threshold 0.02 over the fixture table") {
  const auto t = table1();
  using S = std::set<std::string>;
  CHECK(names(mark_events(t, kDump, 0.02, 2000)) == S{"Cowley", "Reno"});
  CHECK(names(mark_events(t, kDump, 0.02, 2002)).empty());
  CHECK(names(mark_events(t, kDump, 0.02, 2004)) == S{"Reno"});
  CHECK(names(mark_events(t, kDump, 0.02, 2006)).empty());
  CHECK(names(mark_events(t, kDump, 0.02, 2008)) == S{"Reno"});
  CHECK(names(mark_events(t, kDump, 0.02, 2010)) == S{"Cherokee"});
  CHECK(mark_events(t, kDump, 0.0, 2008).fips.size() == 4);
  CHECK(mark_events(t, kDump, 1.0, 2008).fips.empty());
  CHECK(mark_events(t, kDump, 0.0345, 2000).fips == std::set<std::string>{"20155"});
  CHECK(mark_events(t, kDump, 0.02, 1999).fips.empty());
}

TEST_CASE("mark argument checks") {
  const auto t = table1();
  CHECK_THROWS_AS(mark_events(t, "Meth cook", 0.02, 2000), NotFoundError);
  CHECK_THROWS_AS(mark_events(t, kDump, -0.1, 2000), ArgumentError);
  CHECK_THROWS_AS(mark_events(t, kDump, 1.5, 2000), ArgumentError);
  CHECK_THROWS_AS(mark_events(t, kDump, std::nan(""), 2000), ArgumentError);
}

TEST_CASE("table building") {
  const std::vector<std::string> labels{"a", "b"};
  SUBCASE("one report") {
    const auto t = build_table(rows({{0.7, 0.3}}), {event_at("20161", {2004, 5, 1}, "x")}, labels);
    CHECK(t.find({"20161", 2004, "a"})->proportion == 0.7);
    CHECK(t.find({"20161", 2004, "b"})->proportion == 0.3);
    CHECK(t.find({"20161", 2004, "a"})->n_reports == 1);
  }
  SUBCASE("two reports in a cell") {
    const auto t = build_table(rows({{1, 0}, {0, 1}}),
                               {event_at("20161", {2004, 5, 1}, "x"), event_at("20161", {2004, 9, 1}, "y")}, labels);
    CHECK(t.find({"20161", 2004, "a"})->proportion == 0.5);
    CHECK(t.find({"20161", 2004, "b"})->n_reports == 2);
  }
  SUBCASE("misalignment") {
    CHECK_THROWS_AS(build_table(rows({{1, 0}}), {}, labels), ArgumentError);
    CHECK_THROWS_AS(build_table(rows({{1, 0}}), {event_at("20161", {2004, 5, 1}, "x")}, {"a"}), ArgumentError);
  }
  SUBCASE("rows sum to one per county-year") {
    Rng rng(9);
    const auto s = random_setup(rng, 300, 4);
    const auto t = build_table(s.theta, s.events, s.labels);
    std::map<std::pair<std::string, int>, double> sums;
    for (const auto& [k, c] : t.cells()) sums[{k.fips, k.year}] += c.proportion;
    for (const auto& [k, v] : sums) CHECK(std::abs(v - 1) <= 1e-9);
  }
}

TEST_CASE("threshold monotonicity over random tables") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    ProportionTable t;
    const int n = 1 + int(uniform_index(rng, 20));
    for (int i = 0; i < n; ++i)
      t.set({std::to_string(20001 + 2 * i), 2000 + int(uniform_index(rng, 3)), "x"},
            {uniform01(rng) < 0.1 ? 0.0 : uniform01(rng), 1});
    double t1 = uniform01(rng), t2 = uniform01(rng);
    if (t1 > t2) std::swap(t1, t2);
    const int year = 2000 + int(uniform_index(rng, 3));
    const auto lo = mark_events(t, "x", t1, year).fips, hi = mark_events(t, "x", t2, year).fips;
    CHECK(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
  }
}

TEST_CASE("marks follow a topic through relabeling") {
  Rng rng(5);
  const auto s = random_setup(rng, 200, 5);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Matrix theta(s.theta.rows(), 5);
  std::vector<std::string> labels(5);
  for (std::size_t k = 0; k < 5; ++k) {
    labels[perm[k]] = s.labels[k];
    for (std::size_t d = 0; d < s.theta.rows(); ++d) theta(d, perm[k]) = s.theta(d, k);
  }
  const auto a = build_table(s.theta, s.events, s.labels), b = build_table(theta, s.events, labels);
  CHECK(a == b);
  for (const auto& label : s.labels)
    for (int year = 2000; year <= 2002; ++year)
      CHECK(mark_events(a, label, 0.2, year).fips == mark_events(b, label, 0.2, year).fips);
}

TEST_CASE("location-time posterior") {
  const std::vector<ingest::GeoEvent> two{event_at("20161", {2004, 1, 3}, "a"), event_at("20035", {2004, 1, 9}, "b")};
  SUBCASE("mass shares") {
    const auto p = location_time_posterior(rows({{0.75, 0.25}, {0.25, 0.75}}), two, 0, TimeBucket::year);
    CHECK(p.at({"20161", "2004"}) == 0.75);
    CHECK(p.at({"20035", "2004"}) == 0.25);
  }
  SUBCASE("all mass in one cell") {
    const auto p = location_time_posterior(rows({{1, 0}, {0, 1}}), two, 0, TimeBucket::month);
    CHECK(p.at({"20161", "2004-01"}) == 1.0);
    CHECK(p.at({"20035", "2004-01"}) == 0.0);
  }
  SUBCASE("uniform mixtures reduce to count shares") {
    std::vector<ingest::GeoEvent> events;
    for (int i = 0; i < 40; ++i) events.push_back(event_at(i < 10 ? "20161" : "20035", {2006, 3, 1}, std::to_string(i)));
    const auto p = location_time_posterior(Matrix(40, 4, 0.25), events, 2, TimeBucket::year);
    CHECK(p.at({"20161", "2006"}) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p.at({"20035", "2006"}) == doctest::Approx(0.75).epsilon(1e-15));
  }
  SUBCASE("sums to one and ignores event order") {
    Rng rng(12);
    auto s = random_setup(rng, 250, 3);
    const auto p = location_time_posterior(s.theta, s.events, 1, TimeBucket::month);
    double total = 0;
    for (const auto& [k, v] : p) total += v;
    CHECK(std::abs(total - 1) <= 1e-9);
    std::vector<std::size_t> order(s.events.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Matrix theta(s.theta.rows(), 3);
    std::vector<ingest::GeoEvent> events;
    for (std::size_t i = 0; i < order.size(); ++i) {
      events.push_back(s.events[order[i]]);
      std::copy(s.theta.row(order[i]).begin(), s.theta.row(order[i]).end(), theta.row(i).begin());
    }
    const auto q = location_time_posterior(theta, events, 1, TimeBucket::month);
    REQUIRE(q.size() == p.size());
    for (const auto& [k, v] : p) CHECK(q.at(k) == doctest::Approx(v).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(location_time_posterior(rows({{1, 0}, {1, 0}}), two, 1, TimeBucket::year), ArgumentError);
    CHECK_THROWS_AS(location_time_posterior(rows({{1, 0}}), two, 0, TimeBucket::year), ArgumentError);
    CHECK_THROWS_AS(location_time_posterior(rows({{1, 0}, {1, 0}}), two, 2, TimeBucket::year), NotFoundError);
  }
  CHECK(bucket_label({2003, 7, 4}, TimeBucket::month) == "2003-07");
  CHECK(bucket_label({2003, 7, 4}, TimeBucket::year) == "2003");
}

TEST_CASE("frequency filter") {
  const std::map<std::string, double> counts{{"A", 10}, {"B", 1}};
  CHECK(frequency_filter(counts, {5}) == std::set<std::string>{"A"});
  CHECK(frequency_filter(counts, {0}) == std::set<std::string>{"A", "B"});
  CHECK(frequency_filter({{"A", 2}, {"B", 3}}, {2, 2}) == std::set<std::string>{"A"});
  CHECK_THROWS_AS(frequency_filter(counts, {3, 2}), ArgumentError);

  const std::vector<ingest::GeoEvent> events{event_at("20161", {2001, 1, 1}, "a"), event_at("20161", {2002, 1, 1}, "b"),
                                             event_at("20035", {2001, 1, 1}, "c")};
  const auto ec = event_counts(events);
  CHECK(ec.at("20161") == 2);
  CHECK(ec.at("20035") == 1);

  const auto mp = mean_topic_proportion(table1(), kDump);
  const double reno = (0.0350 + 0.0172 + 0.0344 + 0.0166 + 0.0527 + 0.0172) / 6;
  CHECK(mp.at("20155") == doctest::Approx(reno).epsilon(1e-12));
  CHECK(frequency_filter(mp, {0.025}) == std::set<std::string>{"20155"});
}

TEST_CASE("table csv round trip") {
  Rng rng(1);
  const auto s = random_setup(rng, 120, 3);
  const auto t = build_table(s.theta, s.events, s.labels);
  const auto text = t.to_csv();
  const auto back = ProportionTable::from_csv(text);
  CHECK(back == t);
  CHECK(back.to_csv() == text);
  CHECK(table1().to_csv() == ProportionTable::from_csv(table1().to_csv()).to_csv());
}

TEST_CASE("table parse errors") {
  CHECK_THROWS_AS(ProportionTable::from_csv(""), SchemaError);
  CHECK_THROWS_AS(ProportionTable::from_csv("fips,year,topic\n"), SchemaError);
  const std::string header = "fips,year,topic,proportion,n_reports\n";
  CHECK_THROWS_AS(ProportionTable::from_csv(header + "20161,20x0,a,0.5,1\n"), FormatError);
  CHECK_THROWS_AS(ProportionTable::from_csv(header + "20161,2000,a,0.5,1\n20161,2000,a,0.4,1\n"), FormatError);
  CHECK_THROWS_AS(ProportionTable::from_csv(header + "20161,2000,a,1.5,1\n"), ArgumentError);
}
