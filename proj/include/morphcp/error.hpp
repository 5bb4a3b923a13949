#pragma once

#include <stdexcept>
#include <string>

namespace morphcp {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  kConfig,       // bad parameters or flags
  kData,         // unreadable, malformed or inconsistent input data
  kFeasibility,  // calibration sample too small for the requested risk level
  kContract,     // API misuse by the caller
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kFeasibility: return "feasibility";
    case ErrorKind::kContract: return "contract";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class FeasibilityError : public Error {
 public:
  explicit FeasibilityError(const std::string& what) : Error(ErrorKind::kFeasibility, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

}  // namespace morphcp
