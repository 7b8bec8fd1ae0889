#pragma once

#include <stdexcept>
#include <string>

namespace pvdiff {

// Exit codes used by the command-line tool.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

/// Invalid configuration, geometry, or argument.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or inconsistent input data (CSV rows, timestamps, caches).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values during training or sampling.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace pvdiff
