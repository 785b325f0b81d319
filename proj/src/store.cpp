#include "labmap/store.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "labmap/error.hpp"

namespace labmap::server {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::optional<std::size_t> ModelRecord::row_of(const std::string& event_id) const {
  if (!row_index.empty()) {
    auto it = row_index.find(event_id);
    if (it == row_index.end()) return std::nullopt;
    return it->second;
  }
  auto it = std::find(event_ids.begin(), event_ids.end(), event_id);
  if (it == event_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - event_ids.begin());
}

std::size_t ModelRecord::resolve_topic(const std::string& topic) const {
  std::size_t idx = 0;
  auto [p, ec] = std::from_chars(topic.data(), topic.data() + topic.size(), idx);
  if (ec == std::errc{} && p == topic.data() + topic.size()) {
    if (idx >= topic_labels.size()) throw NotFoundError("topic index " + topic + " out of range");
    return idx;
  }
  auto it = std::find(topic_labels.begin(), topic_labels.end(), topic);
  if (it == topic_labels.end()) throw NotFoundError("unknown topic '" + topic + "'");
  return static_cast<std::size_t>(it - topic_labels.begin());
}

std::string event_to_json(const ingest::GeoEvent& e) {
  ordered_json j;
  j["id"] = e.id();
  j["date"] = e.date().to_string();
  j["state"] = e.raw.state;
  j["county"] = e.raw.county_name ? ordered_json(*e.raw.county_name) : ordered_json(nullptr);
  j["address"] = e.raw.address ? ordered_json(*e.raw.address) : ordered_json(nullptr);
  j["event_type"] = e.raw.event_type;
  j["report_text"] = e.raw.report_text;
  j["fips"] = e.fips;
  j["lat"] = e.lat;
  j["lon"] = e.lon;
  j["county_name"] = e.canonical_county;
  return j.dump();
}

ingest::GeoEvent event_from_json(std::string_view line) {
  try {
    const auto j = json::parse(line);
    ingest::GeoEvent e;
    e.raw.id = j.at("id").get<std::string>();
    e.raw.date = Date::parse(j.at("date").get<std::string>());
    e.raw.state = j.at("state").get<std::string>();
    if (!j.at("county").is_null()) e.raw.county_name = j["county"].get<std::string>();
    if (!j.at("address").is_null()) e.raw.address = j["address"].get<std::string>();
    e.raw.event_type = j.at("event_type").get<std::string>();
    e.raw.report_text = j.at("report_text").get<std::string>();
    e.fips = j.at("fips").get<std::string>();
    e.lat = j.at("lat").get<double>();
    e.lon = j.at("lon").get<double>();
    e.canonical_county = j.at("county_name").get<std::string>();
    return e;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("event log: ") + ex.what());
  }
}

std::string model_record_to_json(const ModelRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["kind"] = r.kind;
  j["spec"] = json::parse(r.spec_json.empty() ? "{}" : r.spec_json);
  j["topic_labels"] = r.topic_labels;
  j["top_words"] = r.top_words;
  j["event_ids"] = r.event_ids;
  auto rows = ordered_json::array();
  for (std::size_t d = 0; d < r.theta.rows(); ++d) {
    const auto row = r.theta.row(d);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["theta"] = std::move(rows);
  j["model"] = json::parse(r.model_json.empty() ? "{}" : r.model_json);
  return j.dump();
}

ModelRecord model_record_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    ModelRecord r;
    r.id = j.at("id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.spec_json = j.at("spec").dump();
    r.topic_labels = j.at("topic_labels").get<std::vector<std::string>>();
    r.top_words = j.at("top_words").get<std::vector<std::vector<std::string>>>();
    r.event_ids = j.at("event_ids").get<std::vector<std::string>>();
    const auto rows = j.at("theta").get<std::vector<std::vector<double>>>();
    r.theta = Matrix(rows.size(), r.topic_labels.size());
    for (std::size_t d = 0; d < rows.size(); ++d) {
      if (rows[d].size() != r.topic_labels.size()) throw FormatError("model record: theta row width");
      std::copy(rows[d].begin(), rows[d].end(), r.theta.row(d).begin());
    }
    r.model_json = j.at("model").dump();
    return r;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("model record: ") + ex.what());
  }
}

EventStore::EventStore(fs::path directory) : dir_(std::move(directory)) {
  fs::create_directories(dir_ / "models");
  load();
}

void EventStore::index_event(Indexes& idx, const ingest::GeoEvent& e, std::size_t pos) {
  idx.by_id.emplace(e.id(), pos);
  idx.by_fips[e.fips].push_back(pos);
  idx.by_month[e.date().month_index()].push_back(pos);
  idx.by_type[e.raw.event_type].push_back(pos);
}

EventStore::Indexes EventStore::build_indexes(const std::vector<ingest::GeoEvent>& events) {
  Indexes idx;
  for (std::size_t i = 0; i < events.size(); ++i) index_event(idx, events[i], i);
  return idx;
}

void EventStore::load() {
  std::vector<ingest::GeoEvent> events;
  const auto log = dir_ / "events.jsonl";
  if (fs::exists(log)) {
    std::ifstream in(log, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      events.push_back(event_from_json(line));
    }
  }
  Indexes idx = build_indexes(events);

  std::map<std::string, std::shared_ptr<const ModelRecord>> models;
  std::vector<std::string> order;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_ / "models"))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto r = model_record_from_json(ingest::read_file(f.string()));
    for (std::size_t i = 0; i < r.event_ids.size(); ++i) r.row_index.emplace(r.event_ids[i], i);
    order.push_back(r.id);
    auto id = r.id;
    models.emplace(std::move(id), std::make_shared<const ModelRecord>(std::move(r)));
  }

  std::unique_lock lock(state_mutex_);
  events_ = std::move(events);
  indexes_ = std::move(idx);
  models_ = std::move(models);
  model_order_ = std::move(order);
}

IngestReport EventStore::ingest(const std::vector<ingest::GeoEvent>& events) {
  auto lease = writer_lease();
  IngestReport report;
  std::vector<const ingest::GeoEvent*> fresh;
  {
    std::shared_lock lock(state_mutex_);
    std::unordered_map<std::string, bool> batch;
    for (const auto& e : events) {
      if (indexes_.by_id.contains(e.id()) || batch.contains(e.id())) {
        report.duplicates.push_back(e.id());
        continue;
      }
      batch.emplace(e.id(), true);
      fresh.push_back(&e);
    }
  }
  if (fresh.empty()) return report;

  std::string payload;
  for (const auto* e : fresh) {
    payload += event_to_json(*e);
    payload.push_back('\n');
  }
  const auto log = dir_ / "events.jsonl";
  const auto old_size = fs::exists(log) ? fs::file_size(log) : 0;
  {
    std::ofstream out(log, std::ios::binary | std::ios::app);
    if (fault_ == Fault::fail_log_write) {
      // half a write, then failure
      out.write(payload.data(), static_cast<std::streamsize>(payload.size() / 2));
      out.setstate(std::ios::badbit);
    } else {
      out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
      out.flush();
    }
    if (!out) {
      out.close();
      fs::resize_file(log, old_size);
      throw Error("event log write failed; store unchanged");
    }
  }
  if (fault_ == Fault::crash_after_log_write) throw Error("injected crash after log write");

  std::unique_lock lock(state_mutex_);
  for (const auto* e : fresh) {
    index_event(indexes_, *e, events_.size());
    events_.push_back(*e);
  }
  report.appended = fresh.size();
  return report;
}

std::vector<ingest::GeoEvent> EventStore::query(const EventFilter& f) const {
  if (f.from && f.to && *f.from > *f.to) throw ArgumentError("query requires from <= to");
  if (f.min_prop && !f.topic) throw ArgumentError("min_prop requires a topic");
  std::shared_ptr<const ModelRecord> model;
  std::size_t topic = 0;
  if (f.topic) {
    model = f.model ? this->model(*f.model) : latest_model();
    if (!model) throw NotFoundError("topic filter requires a fitted model");
    topic = model->resolve_topic(*f.topic);
  }

  std::shared_lock lock(state_mutex_);
  // Narrow with the most selective index available.
  std::vector<std::size_t> candidates;
  if (f.fips) {
    auto it = indexes_.by_fips.find(*f.fips);
    if (it != indexes_.by_fips.end()) candidates = it->second;
  } else if (f.event_type) {
    auto it = indexes_.by_type.find(*f.event_type);
    if (it != indexes_.by_type.end()) candidates = it->second;
  } else if (f.from || f.to) {
    const int lo = f.from ? f.from->month_index() : std::numeric_limits<int>::min();
    const int hi = f.to ? f.to->month_index() : std::numeric_limits<int>::max();
    for (auto it = indexes_.by_month.lower_bound(lo); it != indexes_.by_month.end() && it->first <= hi; ++it)
      candidates.insert(candidates.end(), it->second.begin(), it->second.end());
  } else {
    candidates.resize(events_.size());
    for (std::size_t i = 0; i < events_.size(); ++i) candidates[i] = i;
  }

  std::vector<ingest::GeoEvent> out;
  for (std::size_t i : candidates) {
    const auto& e = events_[i];
    if (f.from && e.date() < *f.from) continue;
    if (f.to && e.date() > *f.to) continue;
    if (f.fips && e.fips != *f.fips) continue;
    if (f.event_type && e.raw.event_type != *f.event_type) continue;
    if (model) {
      const auto row = model->row_of(e.id());
      if (!row) continue;
      if (!(model->theta(*row, topic) > f.min_prop.value_or(0.0))) continue;
    }
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.date() != b.date() ? a.date() < b.date() : a.id() < b.id();
  });
  return out;
}

std::vector<ingest::GeoEvent> EventStore::all_events() const {
  std::shared_lock lock(state_mutex_);
  return events_;
}

std::size_t EventStore::size() const {
  std::shared_lock lock(state_mutex_);
  return events_.size();
}

void EventStore::save_model(const ModelRecord& r) const {
  const auto path = dir_ / "models" / (r.id + ".json");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << model_record_to_json(r);
    if (!out) throw Error("cannot write model " + r.id);
  }
  fs::rename(tmp, path);
}

std::string EventStore::register_model(ModelRecord record) {
  if (record.theta.rows() != record.event_ids.size())
    throw ArgumentError("model theta rows != fitted event count");
  if (record.theta.cols() != record.topic_labels.size())
    throw ArgumentError("model theta columns != topic count");
  {
    std::shared_lock lock(state_mutex_);
    if (record.id.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "model-%04zu", model_order_.size() + 1);
      record.id = buf;
    }
    if (models_.contains(record.id)) throw ArgumentError("model id '" + record.id + "' already exists");
  }
  record.row_index.clear();
  for (std::size_t i = 0; i < record.event_ids.size(); ++i) record.row_index.emplace(record.event_ids[i], i);
  save_model(record);
  const std::string id = record.id;
  std::unique_lock lock(state_mutex_);
  models_.emplace(id, std::make_shared<const ModelRecord>(std::move(record)));
  model_order_.push_back(id);
  return id;
}

std::shared_ptr<const ModelRecord> EventStore::model(const std::string& id) const {
  std::shared_lock lock(state_mutex_);
  auto it = models_.find(id);
  if (it == models_.end()) throw NotFoundError("unknown model '" + id + "'");
  return it->second;
}

std::shared_ptr<const ModelRecord> EventStore::latest_model() const {
  std::shared_lock lock(state_mutex_);
  if (model_order_.empty()) return nullptr;
  return models_.at(model_order_.back());
}

std::vector<std::string> EventStore::model_ids() const {
  std::shared_lock lock(state_mutex_);
  return model_order_;
}

std::vector<ingest::GeoEvent> EventStore::model_events(const ModelRecord& model) const {
  std::shared_lock lock(state_mutex_);
  std::vector<ingest::GeoEvent> out;
  out.reserve(model.event_ids.size());
  for (const auto& id : model.event_ids) {
    auto it = indexes_.by_id.find(id);
    if (it == indexes_.by_id.end()) throw NotFoundError("model references missing event '" + id + "'");
    out.push_back(events_[it->second]);
  }
  return out;
}

bool EventStore::indexes_consistent() const {
  std::shared_lock lock(state_mutex_);
  return build_indexes(events_) == indexes_;
}

}  // namespace labmap::server
