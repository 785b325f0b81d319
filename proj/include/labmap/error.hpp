#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace labmap {

// Base for every error the library reports. Subclasses name the category
// so callers (CLI, HTTP layer) can map them to exit codes / status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class UnresolvedLocationError : public Error {
 public:
  explicit UnresolvedLocationError(std::string event_id)
      : Error("unresolved location for event '" + event_id + "'"),
        event_id_(std::move(event_id)) {}
  const std::string& event_id() const { return event_id_; }

 private:
  std::string event_id_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class BusyError : public Error {
 public:
  using Error::Error;
};

}  // namespace labmap
