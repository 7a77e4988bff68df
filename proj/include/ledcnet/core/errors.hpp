#pragma once

#include <stdexcept>
#include <string>

namespace ledcnet {

// Error taxonomy. Shape/parameter/config/data errors indicate invalid input
// and map to CLI exit code 1; everything else escaping to main maps to 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& msg) : Error(msg) {}
};

class UnsupportedLayerError : public Error {
 public:
  explicit UnsupportedLayerError(const std::string& msg) : Error(msg) {}
};

}  // namespace ledcnet
