#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "labmap/ingest.hpp"
#include "labmap/matrix.hpp"

namespace labmap::server {

// A fitted model kept with the mixtures of the events it was fitted on.
struct ModelRecord {
  std::string id;
  std::string kind;        // "lda", "cdtm" or "fixture"
  std::string spec_json;   // the fit request
  std::string model_json;  // serialized LdaModel / CdtmModel, "{}" for fixtures
  std::vector<std::string> topic_labels;
  std::vector<std::vector<std::string>> top_words;
  std::vector<std::string> event_ids;  // theta row order
  Matrix theta;

  std::unordered_map<std::string, std::size_t> row_index;  // filled on registration

  std::optional<std::size_t> row_of(const std::string& event_id) const;
  // A topic given as an index ("3") or a label. Throws NotFoundError.
  std::size_t resolve_topic(const std::string& topic) const;
};

struct EventFilter {
  std::optional<Date> from;
  std::optional<Date> to;
  std::optional<std::string> fips;
  std::optional<std::string> event_type;
  std::optional<std::string> topic;  // requires a model
  std::optional<double> min_prop;
  std::optional<std::string> model;  // default: latest
};

struct IngestReport {
  std::size_t appended = 0;
  std::vector<std::string> duplicates;
};

// Append-only JSONL event log plus in-memory indexes and a model registry
// under one directory. One writer at a time; readers see the last
// committed state.
class EventStore {
 public:
  explicit EventStore(std::filesystem::path directory);

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  IngestReport ingest(const std::vector<ingest::GeoEvent>& events);

  std::vector<ingest::GeoEvent> query(const EventFilter& filter) const;
  std::vector<ingest::GeoEvent> all_events() const;
  std::size_t size() const;

  // Assigns the id when record.id is empty; returns it.
  std::string register_model(ModelRecord record);
  std::shared_ptr<const ModelRecord> model(const std::string& id) const;
  std::shared_ptr<const ModelRecord> latest_model() const;
  std::vector<std::string> model_ids() const;

  // Events a model was fitted on, in theta row order.
  std::vector<ingest::GeoEvent> model_events(const ModelRecord& model) const;

  // Serializes mutations (ingest, fits) across threads.
  std::unique_lock<std::mutex> writer_lease() { return std::unique_lock(writer_); }
  std::unique_lock<std::mutex> try_writer_lease() { return std::unique_lock(writer_, std::try_to_lock); }

  const std::filesystem::path& directory() const { return dir_; }

  // Test hooks.
  enum class Fault { none, fail_log_write, crash_after_log_write };
  void inject_fault(Fault f) { fault_ = f; }

  // Recomputes the indexes from the event list and compares them with the
  // live ones.
  bool indexes_consistent() const;

 private:
  struct Indexes {
    std::unordered_map<std::string, std::size_t> by_id;
    std::map<std::string, std::vector<std::size_t>> by_fips;
    std::map<int, std::vector<std::size_t>> by_month;
    std::map<std::string, std::vector<std::size_t>> by_type;
    bool operator==(const Indexes&) const = default;
  };
  static Indexes build_indexes(const std::vector<ingest::GeoEvent>& events);
  static void index_event(Indexes& idx, const ingest::GeoEvent& e, std::size_t pos);
  void load();
  void save_model(const ModelRecord& r) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex state_mutex_;
  std::mutex writer_;
  std::vector<ingest::GeoEvent> events_;
  Indexes indexes_;
  std::map<std::string, std::shared_ptr<const ModelRecord>> models_;
  std::vector<std::string> model_order_;
  Fault fault_ = Fault::none;
};

std::string event_to_json(const ingest::GeoEvent& e);
ingest::GeoEvent event_from_json(std::string_view line);

std::string model_record_to_json(const ModelRecord& r);
ModelRecord model_record_from_json(std::string_view text);

}  // namespace labmap::server
