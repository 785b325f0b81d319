#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "labmap/corpus.hpp"
#include "labmap/relevance.hpp"
#include "labmap/store.hpp"
#include "labmap/thematic.hpp"

namespace labmap::server {

struct FitSpec {
  std::string model = "lda";  // lda | cdtm
  int k = 10;
  std::optional<double> alpha;
  double eta = 0.01;
  int iterations = 2000;
  int burn_in = 1000;
  int thin = 10;
  double sigma2_rate = 1e-4;
  double v0 = 1.0;
  int max_iters = 100;
  double tol = 1e-4;
  std::uint64_t seed = 1;
  std::size_t min_count = 1;

  static FitSpec from_json(std::string_view text);
  std::string to_json() const;
};

// Builds a corpus from every stored event, fits, registers the model and
// returns its id. Throws BusyError if another mutation holds the store.
std::string run_fit(EventStore& store, const FitSpec& spec, const corpus::StopWords& stopwords);

enum class JobState { queued, running, done, failed };
const char* to_string(JobState s);

struct JobStatus {
  std::string id;
  JobState state = JobState::queued;
  std::string model_id;
  std::string error;
};

// Runs fits on a background thread, one at a time.
class FitJobs {
 public:
  FitJobs(EventStore& store, corpus::StopWords stopwords);
  ~FitJobs();
  FitJobs(const FitJobs&) = delete;
  FitJobs& operator=(const FitJobs&) = delete;

  // Throws BusyError while a fit is queued or running.
  std::string submit(const FitSpec& spec);
  JobStatus status(const std::string& job_id) const;
  JobStatus wait(const std::string& job_id) const;

 private:
  EventStore& store_;
  corpus::StopWords stopwords_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, JobStatus> jobs_;
  std::vector<std::thread> workers_;
  bool active_ = false;
  std::size_t next_id_ = 1;
};

std::shared_ptr<const ModelRecord> resolve_model(const EventStore& store,
                                                 const std::optional<std::string>& id);

struct ChoroplethQuery {
  thematic::Metric metric = thematic::Metric::count;
  std::optional<std::string> topic;
  std::optional<int> year;
  std::size_t classes = 5;
  thematic::Scheme scheme = thematic::Scheme::quantile;
  thematic::Ramp ramp = thematic::Ramp::sequential_red;
  std::optional<std::string> model;
};

// The proportion table of a model's events, keyed by its topic labels.
relevance::ProportionTable model_table(const EventStore& store, const ModelRecord& model);

thematic::ChoroplethLayer choropleth_layer(const EventStore& store, const ChoroplethQuery& q);
thematic::TimeSeries timeline(const EventStore& store, thematic::Scale scale,
                              std::optional<std::string> fips);
relevance::MarkSet marks(const EventStore& store, const std::optional<std::string>& model,
                         const std::string& topic, double threshold, int year);

std::string events_json(const std::vector<ingest::GeoEvent>& events);
std::string topics_json(const EventStore& store, const std::optional<std::string>& model);
std::string marks_json(const relevance::MarkSet& m);
std::string posterior_json(const EventStore& store, const std::optional<std::string>& model,
                           const std::string& topic, relevance::TimeBucket bucket);
std::string job_json(const JobStatus& s);

// A store whose events reproduce a proportion table cell by cell: one
// event per (county, year) and a registered model whose mixtures put the
// tabulated proportion on the table's topic (topic 0) and spread the rest
// evenly over k - 1 other topics. Returns the model id.
std::string build_table_demo(EventStore& store, const relevance::ProportionTable& table,
                             const ingest::Gazetteer& gazetteer, std::size_t k = 50);

}  // namespace labmap::server
