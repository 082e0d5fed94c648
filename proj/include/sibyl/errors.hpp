#pragma once

#include <stdexcept>
#include <string>

namespace sibyl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trace input problems. The CLI maps every TraceError to exit code 3.
struct TraceError : Error {
  using Error::Error;
};
struct MalformedLine : TraceError {
  using TraceError::TraceError;
};
struct NegativeValue : TraceError {
  using TraceError::TraceError;
};
struct EmptyWorkload : TraceError {
  using TraceError::TraceError;
};

// Configuration problems. The CLI maps every ConfigError to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};
struct InvalidParameter : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidFraction : ConfigError {
  using ConfigError::ConfigError;
};
struct UnknownDevice : ConfigError {
  using ConfigError::ConfigError;
};

struct NoCapacityAnywhere : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct TopologyMismatch : Error {
  using Error::Error;
};
struct NonPositiveLatency : Error {
  using Error::Error;
};
struct BufferNotFull : Error {
  using Error::Error;
};

}  // namespace sibyl
