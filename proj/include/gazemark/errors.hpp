#pragma once

#include <stdexcept>
#include <string>

namespace gazemark {

// Malformed on-disk or on-wire data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unusable configuration: missing credential, contradictory settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing external tool or an otherwise unusable host environment.
class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure (missing frame file, unwritable report path).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote peer answered with something that violates its agreed contract
// (wrong dimensions, impossible field values) even though the payload itself
// parsed fine.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport failure. retryable() tells the caller whether another attempt
// may succeed.
class NetworkError : public std::runtime_error {
 public:
  NetworkError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}

  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

}  // namespace gazemark
