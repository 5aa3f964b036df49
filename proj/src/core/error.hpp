#pragma once

#include <stdexcept>
#include <string>

namespace nestknn {

// Status values double as CLI exit codes and C API return codes.
enum class Status : int {
  Ok = 0,
  ConfigError = 2,
  DataError = 3,
  InternalError = 4,
};

class Error : public std::runtime_error {
public:
  Error(Status status, const std::string& message)
      : std::runtime_error(message), status_(status) {}

  Status status() const noexcept { return status_; }

private:
  Status status_;
};

// Invalid configuration: bad thresholds, malformed weight matrices,
// inconsistent candidate grids. The input files were readable; their
// requested setup is not runnable.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& message)
      : Error(Status::ConfigError, message) {}
};

// Invalid data: unreadable or corrupt files, out-of-range samples,
// populations that cannot support the requested operation.
class DataError : public Error {
public:
  explicit DataError(const std::string& message)
      : Error(Status::DataError, message) {}
};

// Broken internal invariant. Reaching this is a bug, not a user mistake.
class InternalError : public Error {
public:
  explicit InternalError(const std::string& message)
      : Error(Status::InternalError, message) {}
};

}  // namespace nestknn
