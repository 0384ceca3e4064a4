#pragma once

#include <stdexcept>
#include <string>

namespace jointfold {

/// Malformed arguments: dimension mismatches, empty clouds, non-finite data.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Inconsistent configuration: generator parameters, noise models, config files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace jointfold
