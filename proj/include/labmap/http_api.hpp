#pragma once

#include <optional>
#include <string>

#include "labmap/service.hpp"

namespace httplib {
class Server;
}

namespace labmap::server {

struct ApiOptions {
  std::optional<std::string> polygons_path;  // served at /api/polygons
};

// Registers the /api routes on srv. The store and jobs must outlive it.
void install_routes(httplib::Server& srv, EventStore& store, FitJobs& jobs, ApiOptions options = {});

// HTTP status for an exception thrown by a handler.
int status_for(const std::exception& e);

}  // namespace labmap::server
