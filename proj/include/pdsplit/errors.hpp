#pragma once

#include <stdexcept>
#include <string>

namespace pdsplit {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameters, weights, or configuration values.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dimension mismatches and out-of-range block indices.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& msg) : Error(msg) {}
};

// Violations of the bounded-delay communication contract, including
// reads of view blocks that were never delivered.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

// Inner iterations (Newton, bisection, polish) failed to converge.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// A tuning rule or rate certificate does not apply to the problem
// (for example non-smooth h where the bound needs mu_h > 0).
class InapplicabilityError : public ConfigError {
 public:
  explicit InapplicabilityError(const std::string& msg) : ConfigError(msg) {}
};

// An iterate became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, long iteration)
      : Error(msg + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

}  // namespace pdsplit
