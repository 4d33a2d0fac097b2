#pragma once

#include <stdexcept>
#include <string>

namespace admpo {

// Error taxonomy. ConfigError maps to CLI exit code 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration: unknown keys, malformed values, shape mismatches.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// API precondition violated by the caller (bad k, non-scalar loss, ...).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Data/sampling problems: empty buffers, no valid window, bad dataset.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite losses or diverged optimization.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

// File I/O failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace admpo
