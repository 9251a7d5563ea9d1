#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracland {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not reach its target accuracy.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double partial)
      : Error(what), partial_(partial) {}
  [[nodiscard]] double partial_value() const noexcept { return partial_; }

 private:
  double partial_;
};

/// State left the admissible domain during integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t last_valid)
      : Error(what), last_valid_(last_valid) {}
  [[nodiscard]] std::size_t last_valid_index() const noexcept { return last_valid_; }

 private:
  std::size_t last_valid_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Trajectories do not cover the requested state range.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (no recovery, no bracket, ...).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// The requested feature is not available for this model or configuration.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Series too short for the requested spectral or block analysis.
class SizingError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracland
