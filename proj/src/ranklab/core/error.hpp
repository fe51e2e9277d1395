#pragma once

#include <stdexcept>
#include <string>

namespace ranklab {

// Base for all library errors.  `kind()` is a short machine-readable tag the
// CLI prints as "error: <kind>: <message>" so scripted callers can branch on
// the failure class without parsing prose.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Bad or inconsistent configuration: unknown keys, shape mismatches,
// out-of-range hyperparameters, missing pipeline prerequisites.
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

// Malformed or insufficient input data: invalid slates, empty datasets,
// unparseable data files.
struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data", m) {}
};

// File I/O failures and format violations in artifacts we read back.
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// A backward pass was asked to use forward caches recorded under an older
// parameter version; silently mixing them would corrupt gradients.
struct StaleCacheError : Error {
  explicit StaleCacheError(const std::string& m) : Error("stale-cache", m) {}
};

// Training produced a non-finite loss or gradient.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};

// A pipeline stage was invoked before the stages it depends on; the message
// names the artifacts and the stage to run first.
struct PipelineError : Error {
  explicit PipelineError(const std::string& m) : Error("pipeline", m) {}
};

}  // namespace ranklab
