// labmap: command-line driver for the event store, topic models and map
// layers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "labmap/error.hpp"
#include "labmap/geoexport.hpp"
#include "labmap/http_api.hpp"
#include "labmap/ingest.hpp"
#include "labmap/relevance.hpp"
#include "labmap/service.hpp"
#include "labmap/synth.hpp"

namespace fs = std::filesystem;
using namespace labmap;

namespace {

struct Config {
  std::string store = "labmap-store";
  std::string gazetteer = LABMAP_DATA_DIR "/gazetteer_ks.csv";
  std::string stopwords = LABMAP_DATA_DIR "/stopwords.txt";
  std::optional<std::string> polygons;
  nlohmann::json defaults = nlohmann::json::object();  // fit spec keys
};

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ingest::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config: " + std::string(e.what()));
  }
  if (j.contains("store")) c.store = j["store"].get<std::string>();
  if (j.contains("gazetteer")) c.gazetteer = j["gazetteer"].get<std::string>();
  if (j.contains("stopwords")) c.stopwords = j["stopwords"].get<std::string>();
  if (j.contains("polygons")) c.polygons = j["polygons"].get<std::string>();
  if (j.contains("defaults")) c.defaults = j["defaults"];
  return c;
}

void write_out(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
    if (!bytes.empty() && bytes.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
  if (!out) throw Error("cannot write '" + path + "'");
}

ingest::RecordFormat format_of(const std::string& path, const std::string& given) {
  const std::string f = !given.empty() ? given : fs::path(path).extension() == ".jsonl" ? "jsonl" : "csv";
  if (f == "csv") return ingest::RecordFormat::csv;
  if (f == "jsonl") return ingest::RecordFormat::jsonl;
  throw ArgumentError("record format must be csv or jsonl");
}

void report_ingest(const server::IngestReport& r, std::size_t unresolved) {
  std::cout << "appended " << r.appended << ", duplicates " << r.duplicates.size()
            << ", unresolved " << unresolved << "\n";
  for (const auto& id : r.duplicates) std::cerr << "duplicate id: " << id << "\n";
}

int exit_code(const std::exception& e) {
  switch (server::status_for(e)) {
    case 400: return 2;
    case 404: return 3;
    case 409: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal mining of clandestine-lab seizure reports"};
  app.require_subcommand(1);
  std::string config_path, store_opt;
  app.add_option("--config", config_path, "JSON config (store, gazetteer, stopwords, polygons, defaults)");
  app.add_option("--store", store_opt, "store directory");

  std::string input, gazetteer_opt, record_format;
  auto* ingest_cmd = app.add_subcommand("ingest", "georeference and append event records");
  ingest_cmd->add_option("--input", input, "csv or jsonl records")->required();
  ingest_cmd->add_option("--gazetteer", gazetteer_opt, "county gazetteer csv");
  ingest_cmd->add_option("--format", record_format, "csv|jsonl (default: by extension)");

  std::string profile_path, synth_out;
  std::uint64_t seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic seizure events");
  synth_cmd->add_option("--profile", profile_path, "profile JSON (default: Kansas 2000-2011)");
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--gazetteer", gazetteer_opt);
  synth_cmd->add_option("--out", synth_out, "write records instead of ingesting");
  synth_cmd->add_option("--format", record_format, "csv|jsonl for --out");

  std::string model_kind = "lda";
  std::optional<int> k, iterations, burn_in, max_iters;
  std::optional<double> alpha, eta, sigma2_rate, v0;
  std::optional<std::size_t> min_count;
  std::optional<std::uint64_t> fit_seed;
  auto* fit_cmd = app.add_subcommand("fit", "fit a topic model over the stored events");
  fit_cmd->add_option("--model", model_kind)->check(CLI::IsMember({"lda", "cdtm"}));
  fit_cmd->add_option("--k", k);
  fit_cmd->add_option("--seed", fit_seed);
  fit_cmd->add_option("--alpha", alpha);
  fit_cmd->add_option("--eta", eta);
  fit_cmd->add_option("--iterations", iterations, "Gibbs sweeps (cdtm: warm start sweeps)");
  fit_cmd->add_option("--burn-in", burn_in);
  fit_cmd->add_option("--min-count", min_count);
  fit_cmd->add_option("--sigma2-rate", sigma2_rate, "cdtm drift variance per day");
  fit_cmd->add_option("--v0", v0);
  fit_cmd->add_option("--max-iters", max_iters);

  std::string topic, model_id, table_path;
  double threshold = 0.02;
  int year = 0;
  auto* mark_cmd = app.add_subcommand("mark", "counties whose topic proportion exceeds a threshold");
  mark_cmd->add_option("--topic", topic)->required();
  mark_cmd->add_option("--threshold", threshold);
  mark_cmd->add_option("--year", year)->required();
  mark_cmd->add_option("--model", model_id);
  mark_cmd->add_option("--table", table_path, "use a proportion table csv instead of a model");

  std::optional<int> map_year;
  std::string metric = "count", scheme = "quantile", ramp = "sequential_red", out_path, polygons_opt;
  std::size_t classes = 5;
  auto* map_cmd = app.add_subcommand("choropleth", "county choropleth layer");
  map_cmd->add_option("--year", map_year);
  map_cmd->add_option("--metric", metric);
  map_cmd->add_option("--topic", topic);
  map_cmd->add_option("--model", model_id);
  map_cmd->add_option("--classes", classes);
  map_cmd->add_option("--scheme", scheme);
  map_cmd->add_option("--ramp", ramp);
  map_cmd->add_option("--polygons", polygons_opt, "join the layer onto county polygons");
  map_cmd->add_option("--out", out_path);

  std::string scale = "monthly", fips;
  auto* timeline_cmd = app.add_subcommand("timeline", "event counts per month or year");
  timeline_cmd->add_option("--scale", scale);
  timeline_cmd->add_option("--fips", fips);
  timeline_cmd->add_option("--out", out_path);

  std::string export_format = "geojson", from, to;
  auto* export_cmd = app.add_subcommand("export", "write events as KML or GeoJSON");
  export_cmd->add_option("--format", export_format)->check(CLI::IsMember({"kml", "geojson"}));
  export_cmd->add_option("--out", out_path);
  export_cmd->add_option("--from", from);
  export_cmd->add_option("--to", to);
  export_cmd->add_option("--fips", fips);

  int port = 8080;
  std::string host = "127.0.0.1";
  auto* serve_cmd = app.add_subcommand("serve", "HTTP query API");
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--polygons", polygons_opt);

  auto* demo_cmd = app.add_subcommand("demo", "populate a store from a proportion table");
  demo_cmd->add_option("--table", table_path)->required();
  demo_cmd->add_option("--gazetteer", gazetteer_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = load_config(config_path);
    if (!store_opt.empty()) cfg.store = store_opt;
    if (!gazetteer_opt.empty()) cfg.gazetteer = gazetteer_opt;
    if (!polygons_opt.empty()) cfg.polygons = polygons_opt;

    server::EventStore store(cfg.store);

    if (*ingest_cmd) {
      const auto gaz = ingest::Gazetteer::load_file(cfg.gazetteer);
      const auto parsed = ingest::parse_records(ingest::read_file(input), format_of(input, record_format));
      for (const auto& e : parsed.errors) std::cerr << input << ":" << e.line << ": " << e.message << "\n";
      const auto geo = ingest::georeference_all(parsed.events, gaz);
      for (const auto& id : geo.unresolved_ids) std::cerr << "unresolved location: " << id << "\n";
      report_ingest(store.ingest(geo.events), geo.unresolved_ids.size());
    } else if (*synth_cmd) {
      const auto gaz = ingest::Gazetteer::load_file(cfg.gazetteer);
      const auto profile = profile_path.empty() ? corpus::SynthProfile{}
                                                : corpus::SynthProfile::from_json(ingest::read_file(profile_path));
      const auto data = corpus::synth_events(profile, gaz, seed);
      if (!synth_out.empty()) {
        std::vector<ingest::RawEvent> raw;
        for (const auto& e : data.events) raw.push_back(e.raw);
        write_out(synth_out, ingest::serialize_records(raw, format_of(synth_out, record_format)));
        std::cout << "wrote " << raw.size() << " events\n";
      } else {
        report_ingest(store.ingest(data.events), 0);
      }
    } else if (*fit_cmd) {
      auto j = cfg.defaults;
      j["model"] = model_kind;
      if (k) j["k"] = *k;
      if (fit_seed) j["seed"] = *fit_seed;
      if (alpha) j["alpha"] = *alpha;
      if (eta) j["eta"] = *eta;
      if (iterations) j["iterations"] = *iterations;
      if (burn_in) j["burn_in"] = *burn_in;
      if (min_count) j["min_count"] = *min_count;
      if (sigma2_rate) j["sigma2_rate"] = *sigma2_rate;
      if (v0) j["v0"] = *v0;
      if (max_iters) j["max_iters"] = *max_iters;
      const auto spec = server::FitSpec::from_json(j.dump());
      const auto stop = corpus::load_stopwords(cfg.stopwords);
      std::cout << server::run_fit(store, spec, stop) << "\n";
    } else if (*mark_cmd) {
      relevance::MarkSet m;
      if (!table_path.empty())
        m = relevance::mark_events(relevance::ProportionTable::load(table_path), topic, threshold, year);
      else
        m = server::marks(store, model_id.empty() ? std::nullopt : std::optional(model_id), topic,
                          threshold, year);
      std::optional<ingest::Gazetteer> gaz;
      if (fs::exists(cfg.gazetteer)) gaz = ingest::Gazetteer::load_file(cfg.gazetteer);
      for (const auto& f : m.fips) {
        const auto* c = gaz ? gaz->find_fips(f) : nullptr;
        std::cout << f << (c ? "\t" + c->county_name : std::string()) << "\n";
      }
    } else if (*map_cmd) {
      server::ChoroplethQuery q;
      q.metric = thematic::parse_metric(metric);
      q.scheme = thematic::parse_scheme(scheme);
      q.ramp = thematic::parse_ramp(ramp);
      q.classes = classes;
      q.year = map_year;
      if (!topic.empty()) q.topic = topic;
      if (!model_id.empty()) q.model = model_id;
      const auto layer = server::choropleth_layer(store, q);
      write_out(out_path, cfg.polygons
                              ? geoexport::write_geojson_layer(layer, ingest::read_file(*cfg.polygons))
                              : layer.to_json());
    } else if (*timeline_cmd) {
      const auto ts = server::timeline(store, thematic::parse_scale(scale),
                                       fips.empty() ? std::nullopt : std::optional(fips));
      write_out(out_path, geoexport::write_timeline_json(ts));
    } else if (*export_cmd) {
      server::EventFilter f;
      if (!from.empty()) f.from = Date::parse(from);
      if (!to.empty()) f.to = Date::parse(to);
      if (!fips.empty()) f.fips = fips;
      const auto events = store.query(f);
      write_out(out_path, export_format == "kml" ? geoexport::write_kml(events)
                                                 : geoexport::write_geojson(events));
    } else if (*serve_cmd) {
      server::FitJobs jobs(store, corpus::load_stopwords(cfg.stopwords));
      httplib::Server srv;
      server::install_routes(srv, store, jobs, {cfg.polygons});
      std::cout << "listening on http://" << host << ":" << port << std::endl;
      if (!srv.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*demo_cmd) {
      const auto gaz = ingest::Gazetteer::load_file(cfg.gazetteer);
      std::cout << server::build_table_demo(store, relevance::ProportionTable::load(table_path), gaz)
                << "\n";
    }
  } catch (const UnresolvedLocationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return 0;
}
