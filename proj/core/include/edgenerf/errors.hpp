#pragma once

#include <stdexcept>
#include <string>

namespace edgenerf {

// Caller passed a value outside an operation's domain (pixel out of bounds,
// inverted thresholds, ...).
class InputDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent configuration or dataset (dimension mismatch, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient became non-finite during optimization.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long iteration, std::string term)
      : std::runtime_error(what), iteration_(iteration), term_(std::move(term)) {}

  long iteration() const { return iteration_; }
  const std::string& term() const { return term_; }

 private:
  long iteration_;
  std::string term_;
};

}  // namespace edgenerf
