#pragma once

#include <stdexcept>
#include <string>

namespace gmc {

// Bad inputs: malformed manifests, parameter/precondition violations.
// CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failures (e.g. NegativeSpectrum). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gmc
