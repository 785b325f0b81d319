#include "labmap/http_api.hpp"

#include <charconv>
#include <functional>

#include <httplib.h>
#include <json.hpp>

#include "labmap/error.hpp"
#include "labmap/geoexport.hpp"

namespace labmap::server {

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::string required(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v || v->empty()) throw ArgumentError(std::string("missing parameter '") + name + "'");
  return *v;
}

template <class T>
T number(const std::string& s, const char* name) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ArgumentError(std::string("bad value for '") + name + "': '" + s + "'");
  return v;
}

template <class T>
std::optional<T> opt_number(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v || v->empty()) return std::nullopt;
  return number<T>(*v, name);
}

std::optional<Date> opt_date(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v || v->empty()) return std::nullopt;
  return Date::parse(*v);
}

std::optional<std::string> opt_text(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v || v->empty()) return std::nullopt;
  return v;
}

EventFilter filter_of(const httplib::Request& req) {
  EventFilter f;
  f.from = opt_date(req, "from");
  f.to = opt_date(req, "to");
  f.fips = opt_text(req, "fips");
  f.event_type = opt_text(req, "event_type");
  f.topic = opt_text(req, "topic");
  f.min_prop = opt_number<double>(req, "min_prop");
  f.model = opt_text(req, "model");
  return f;
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

Handler guard(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const std::exception& e) {
      send_error(res, status_for(e), e.what());
    }
  };
}

}  // namespace

int status_for(const std::exception& e) {
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const SchemaError*>(&e))
    return 400;
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const BusyError*>(&e)) return 409;
  return 500;
}

void install_routes(httplib::Server& srv, EventStore& store, FitJobs& jobs, ApiOptions options) {
  srv.Get("/api/events", guard([&store](const auto& req, auto& res) {
    const auto events = store.query(filter_of(req));
    const auto format = param(req, "format").value_or("json");
    if (format == "geojson")
      res.set_content(geoexport::write_geojson(events), "application/geo+json");
    else if (format == "json")
      res.set_content(events_json(events), "application/json");
    else
      throw ArgumentError("format must be json or geojson");
  }));

  srv.Get("/api/export/kml", guard([&store](const auto& req, auto& res) {
    res.set_content(geoexport::write_kml(store.query(filter_of(req))),
                    "application/vnd.google-earth.kml+xml");
  }));

  srv.Get("/api/choropleth", guard([&store](const auto& req, auto& res) {
    ChoroplethQuery q;
    if (auto m = opt_text(req, "metric")) q.metric = thematic::parse_metric(*m);
    if (auto s = opt_text(req, "scheme")) q.scheme = thematic::parse_scheme(*s);
    if (auto r = opt_text(req, "ramp")) q.ramp = thematic::parse_ramp(*r);
    if (auto c = opt_number<std::size_t>(req, "classes")) q.classes = *c;
    q.year = opt_number<int>(req, "year");
    q.topic = opt_text(req, "topic");
    q.model = opt_text(req, "model");
    res.set_content(choropleth_layer(store, q).to_json(), "application/json");
  }));

  srv.Get("/api/timeline", guard([&store](const auto& req, auto& res) {
    const auto scale = thematic::parse_scale(param(req, "scale").value_or("monthly"));
    res.set_content(geoexport::write_timeline_json(timeline(store, scale, opt_text(req, "fips"))),
                    "application/json");
  }));

  srv.Get("/api/topics", guard([&store](const auto& req, auto& res) {
    res.set_content(topics_json(store, opt_text(req, "model")), "application/json");
  }));

  srv.Get("/api/marks", guard([&store](const auto& req, auto& res) {
    const auto m = marks(store, opt_text(req, "model"), required(req, "topic"),
                         number<double>(required(req, "threshold"), "threshold"),
                         number<int>(required(req, "year"), "year"));
    res.set_content(marks_json(m), "application/json");
  }));

  srv.Get("/api/posterior", guard([&store](const auto& req, auto& res) {
    const auto b = param(req, "bucket").value_or("year");
    if (b != "year" && b != "month") throw ArgumentError("bucket must be year or month");
    res.set_content(posterior_json(store, opt_text(req, "model"), required(req, "topic"),
                                   b == "year" ? relevance::TimeBucket::year
                                               : relevance::TimeBucket::month),
                    "application/json");
  }));

  srv.Get("/api/polygons", guard([options](const auto&, auto& res) {
    if (!options.polygons_path) throw NotFoundError("no polygon file configured");
    res.set_content(ingest::read_file(*options.polygons_path), "application/geo+json");
  }));

  srv.Post("/api/admin/fit", guard([&jobs](const auto& req, auto& res) {
    const auto spec = req.body.empty() ? FitSpec{} : FitSpec::from_json(req.body);
    const auto id = jobs.submit(spec);
    res.status = 202;
    res.set_content(nlohmann::json{{"job_id", id}}.dump(), "application/json");
  }));

  srv.Get("/api/admin/jobs/:id", guard([&jobs](const auto& req, auto& res) {
    res.set_content(job_json(jobs.status(req.path_params.at("id"))), "application/json");
  }));
}

}  // namespace labmap::server
