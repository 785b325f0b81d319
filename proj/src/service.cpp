#include "labmap/service.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "labmap/dyntopic.hpp"
#include "labmap/error.hpp"
#include "labmap/lda.hpp"
#include "labmap/synth.hpp"

namespace labmap::server {

using json = nlohmann::ordered_json;

FitSpec FitSpec::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("fit spec: ") + e.what());
  }
  if (!j.is_object()) throw ArgumentError("fit spec must be a JSON object");
  static const std::set<std::string> known = {"model", "k", "alpha", "eta", "iterations",
                                              "burn_in", "thin", "sigma2_rate", "v0",
                                              "max_iters", "tol", "seed", "min_count"};
  FitSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (!known.contains(key)) throw ArgumentError("fit spec: unknown key '" + key + "'");
      if (key == "model") s.model = v.get<std::string>();
      else if (key == "k") s.k = v.get<int>();
      else if (key == "alpha") { if (!v.is_null()) s.alpha = v.get<double>(); }
      else if (key == "eta") s.eta = v.get<double>();
      else if (key == "iterations") s.iterations = v.get<int>();
      else if (key == "burn_in") s.burn_in = v.get<int>();
      else if (key == "thin") s.thin = v.get<int>();
      else if (key == "sigma2_rate") s.sigma2_rate = v.get<double>();
      else if (key == "v0") s.v0 = v.get<double>();
      else if (key == "max_iters") s.max_iters = v.get<int>();
      else if (key == "tol") s.tol = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "min_count") s.min_count = v.get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("fit spec: ") + e.what());
  }
  return s;
}

std::string FitSpec::to_json() const {
  json j;
  j["model"] = model;
  j["k"] = k;
  j["alpha"] = alpha ? json(*alpha) : json(nullptr);
  j["eta"] = eta;
  j["iterations"] = iterations;
  j["burn_in"] = burn_in;
  j["thin"] = thin;
  j["sigma2_rate"] = sigma2_rate;
  j["v0"] = v0;
  j["max_iters"] = max_iters;
  j["tol"] = tol;
  j["seed"] = seed;
  j["min_count"] = min_count;
  return j.dump();
}

namespace {

void check_spec(const FitSpec& s) {
  if (s.model != "lda" && s.model != "cdtm") throw ArgumentError("model must be lda or cdtm");
  if (s.k < 1) throw ArgumentError("k must be >= 1");
  if (s.k > 65535) throw ArgumentError("k too large");
  if (s.alpha && !(*s.alpha > 0)) throw ArgumentError("alpha must be > 0");
  if (!(s.eta > 0)) throw ArgumentError("eta must be > 0");
  if (s.iterations < 1 || s.burn_in < 0 || s.burn_in >= s.iterations)
    throw ArgumentError("need 0 <= burn_in < iterations");
  if (s.thin < 1) throw ArgumentError("thin must be >= 1");
  if (!(s.sigma2_rate >= 0) || !(s.v0 > 0)) throw ArgumentError("need sigma2_rate >= 0 and v0 > 0");
  if (s.max_iters < 0 || !(s.tol > 0)) throw ArgumentError("need max_iters >= 0 and tol > 0");
}

std::string topic_label(const std::vector<std::string>& words, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "topic-%02zu", k);
  std::string label = buf;
  for (std::size_t i = 0; i < words.size() && i < 3; ++i) label += (i ? " " : ": ") + words[i];
  return label;
}

}  // namespace

std::string run_fit(EventStore& store, const FitSpec& spec, const corpus::StopWords& stopwords) {
  check_spec(spec);
  auto lease = store.try_writer_lease();
  if (!lease.owns_lock()) throw BusyError("another mutation is in progress");

  const auto events = store.all_events();
  if (events.empty()) throw ArgumentError("store is empty");
  const auto corpus = corpus::corpus_from_events(events, stopwords, spec.min_count);
  const auto& vocab = corpus.vocabulary.words();

  ModelRecord rec;
  rec.kind = spec.model;
  rec.spec_json = spec.to_json();
  for (const auto& e : events) rec.event_ids.push_back(e.id());

  const std::size_t k = static_cast<std::size_t>(spec.k);
  if (spec.model == "lda") {
    lda::LdaOptions o;
    o.k = spec.k;
    o.alpha = spec.alpha;
    o.eta = spec.eta;
    o.iterations = spec.iterations;
    o.burn_in = spec.burn_in;
    o.thin = spec.thin;
    o.seed = spec.seed;
    auto fit = lda::fit_gibbs(corpus, o);
    rec.model_json = lda::to_json(fit.model);
    rec.theta = std::move(fit.theta);
    for (std::size_t t = 0; t < k; ++t) {
      std::vector<std::string> words;
      for (auto w : fit.model.top_words(t, 10)) words.push_back(vocab[w]);
      rec.topic_labels.push_back(topic_label(words, t));
      rec.top_words.push_back(std::move(words));
    }
  } else {
    dyntopic::CdtmOptions o;
    o.k = spec.k;
    if (spec.alpha) o.alpha = *spec.alpha;
    o.sigma2_rate = spec.sigma2_rate;
    o.v0 = spec.v0;
    o.max_iters = spec.max_iters;
    o.tol = spec.tol;
    o.seed = spec.seed;
    o.init_iterations = spec.iterations;
    o.init_burn_in = spec.burn_in;
    const auto epochs = dyntopic::monthly_epochs(corpus);
    auto fit = dyntopic::fit_cdtm(corpus, epochs, o);
    rec.model_json = dyntopic::to_json(fit.model);
    rec.theta = dyntopic::document_theta(fit.model, fit.state);
    const std::size_t last = fit.model.mean.times() - 1;
    for (std::size_t t = 0; t < k; ++t) {
      std::vector<std::string> words;
      for (auto w : fit.model.top_words(last, t, 10)) words.push_back(vocab[w]);
      rec.topic_labels.push_back(topic_label(words, t));
      rec.top_words.push_back(std::move(words));
    }
  }
  return store.register_model(std::move(rec));
}

const char* to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

FitJobs::FitJobs(EventStore& store, corpus::StopWords stopwords)
    : store_(store), stopwords_(std::move(stopwords)) {}

FitJobs::~FitJobs() {
  for (auto& t : workers_)
    if (t.joinable()) t.join();
}

std::string FitJobs::submit(const FitSpec& spec) {
  std::unique_lock lock(mutex_);
  if (active_) throw BusyError("a fit is already running");
  char buf[32];
  std::snprintf(buf, sizeof buf, "job-%04zu", next_id_++);
  const std::string id = buf;
  jobs_[id] = JobStatus{id, JobState::queued, {}, {}};
  active_ = true;
  for (auto& t : workers_)
    if (t.joinable()) t.join();
  workers_.clear();
  workers_.emplace_back([this, id, spec] {
    {
      std::lock_guard g(mutex_);
      jobs_[id].state = JobState::running;
    }
    JobStatus result{id, JobState::done, {}, {}};
    try {
      result.model_id = run_fit(store_, spec, stopwords_);
    } catch (const std::exception& e) {
      result.state = JobState::failed;
      result.error = e.what();
    }
    {
      std::lock_guard g(mutex_);
      jobs_[id] = result;
      active_ = false;
    }
    changed_.notify_all();
  });
  return id;
}

JobStatus FitJobs::status(const std::string& job_id) const {
  std::lock_guard g(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFoundError("unknown job '" + job_id + "'");
  return it->second;
}

JobStatus FitJobs::wait(const std::string& job_id) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFoundError("unknown job '" + job_id + "'");
  changed_.wait(lock, [&] {
    const auto s = jobs_.at(job_id).state;
    return s == JobState::done || s == JobState::failed;
  });
  return jobs_.at(job_id);
}

std::shared_ptr<const ModelRecord> resolve_model(const EventStore& store,
                                                 const std::optional<std::string>& id) {
  if (id) return store.model(*id);
  auto m = store.latest_model();
  if (!m) throw NotFoundError("no fitted model");
  return m;
}

relevance::ProportionTable model_table(const EventStore& store, const ModelRecord& model) {
  return relevance::build_table(model.theta, store.model_events(model), model.topic_labels);
}

thematic::ChoroplethLayer choropleth_layer(const EventStore& store, const ChoroplethQuery& q) {
  thematic::RegionValues values;
  if (q.metric == thematic::Metric::count) {
    values = thematic::aggregate_counts(store.all_events(), q.year);
  } else {
    if (!q.topic) throw ArgumentError("metric topic_prop requires a topic");
    auto model = resolve_model(store, q.model);
    const auto& label = model->topic_labels[model->resolve_topic(*q.topic)];
    values = thematic::aggregate_topic_proportion(model_table(store, *model), label, q.year);
  }
  return thematic::build_layer(std::move(values), q.metric, q.scheme, q.classes, q.ramp, q.year);
}

thematic::TimeSeries timeline(const EventStore& store, thematic::Scale scale,
                              std::optional<std::string> fips) {
  return thematic::timeline_series(store.all_events(), scale, std::move(fips));
}

relevance::MarkSet marks(const EventStore& store, const std::optional<std::string>& model,
                         const std::string& topic, double threshold, int year) {
  auto m = resolve_model(store, model);
  const auto& label = m->topic_labels[m->resolve_topic(topic)];
  return relevance::mark_events(model_table(store, *m), label, threshold, year);
}

std::string events_json(const std::vector<ingest::GeoEvent>& events) {
  std::string out = "[";
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i) out.push_back(',');
    out += event_to_json(events[i]);
  }
  out.push_back(']');
  return out;
}

std::string topics_json(const EventStore& store, const std::optional<std::string>& model) {
  auto m = resolve_model(store, model);
  json arr = json::array();
  for (std::size_t k = 0; k < m->topic_labels.size(); ++k) {
    json t;
    t["topic_id"] = k;
    t["label"] = m->topic_labels[k];
    t["top_words"] = k < m->top_words.size() ? json(m->top_words[k]) : json::array();
    arr.push_back(std::move(t));
  }
  return arr.dump();
}

std::string marks_json(const relevance::MarkSet& m) {
  json j;
  j["topic"] = m.topic;
  j["threshold"] = m.threshold;
  j["year"] = m.year;
  j["marked"] = json(std::vector<std::string>(m.fips.begin(), m.fips.end()));
  return j.dump();
}

std::string posterior_json(const EventStore& store, const std::optional<std::string>& model,
                           const std::string& topic, relevance::TimeBucket bucket) {
  auto m = resolve_model(store, model);
  const std::size_t k = m->resolve_topic(topic);
  const auto post = relevance::location_time_posterior(m->theta, store.model_events(*m), k, bucket);
  json j;
  j["topic"] = m->topic_labels[k];
  j["bucket"] = bucket == relevance::TimeBucket::year ? "year" : "month";
  json cells = json::array();
  for (const auto& [key, p] : post) cells.push_back({{"fips", key.fips}, {"bucket", key.bucket}, {"p", p}});
  j["cells"] = std::move(cells);
  return j.dump();
}

std::string job_json(const JobStatus& s) {
  json j;
  j["job_id"] = s.id;
  j["status"] = to_string(s.state);
  j["model_id"] = s.model_id.empty() ? json(nullptr) : json(s.model_id);
  j["error"] = s.error.empty() ? json(nullptr) : json(s.error);
  return j.dump();
}

std::string build_table_demo(EventStore& store, const relevance::ProportionTable& table,
                             const ingest::Gazetteer& gazetteer, std::size_t k) {
  const auto topics = table.topics();
  if (topics.size() != 1) throw ArgumentError("demo table must hold exactly one topic");
  if (k < 2) throw ArgumentError("demo model needs k >= 2");

  std::vector<ingest::GeoEvent> events;
  std::vector<double> first_topic;
  for (const auto& [key, cell] : table.cells()) {
    const auto* county = gazetteer.find_fips(key.fips);
    if (!county) throw NotFoundError("fips " + key.fips + " not in gazetteer");
    const std::size_t n = std::max<std::size_t>(1, cell.n_reports);
    for (std::size_t r = 0; r < n; ++r) {
      ingest::GeoEvent e;
      char id[48];
      std::snprintf(id, sizeof id, "t1-%s-%d-%02zu", key.fips.c_str(), key.year, r);
      e.raw.id = id;
      e.raw.date = Date{key.year, 6, 15};
      e.raw.state = county->state;
      e.raw.county_name = county->county_name;
      e.raw.event_type = key.topic;
      e.raw.report_text = "Seizure reported in " + county->county_name + " County.";
      e.fips = county->fips;
      e.lat = county->lat;
      e.lon = county->lon;
      e.canonical_county = county->county_name;
      events.push_back(std::move(e));
      first_topic.push_back(cell.proportion);
    }
  }
  auto report = store.ingest(events);
  if (!report.duplicates.empty()) throw ArgumentError("demo store already populated");

  ModelRecord rec;
  rec.kind = "fixture";
  rec.spec_json = "{\"model\":\"fixture\",\"k\":" + std::to_string(k) + "}";
  rec.model_json = "{}";
  rec.topic_labels = corpus::event_type_labels(k);
  rec.topic_labels[0] = *topics.begin();
  for (std::size_t i = 1; i < k; ++i)
    if (rec.topic_labels[i] == rec.topic_labels[0]) rec.topic_labels[i] += " (other)";
  rec.top_words.assign(k, {});
  rec.theta = Matrix(events.size(), k);
  for (std::size_t d = 0; d < events.size(); ++d) {
    rec.event_ids.push_back(events[d].id());
    rec.theta(d, 0) = first_topic[d];
    for (std::size_t t = 1; t < k; ++t) rec.theta(d, t) = (1.0 - first_topic[d]) / double(k - 1);
  }
  return store.register_model(std::move(rec));
}

}  // namespace labmap::server
