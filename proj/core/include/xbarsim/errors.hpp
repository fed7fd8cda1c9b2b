#pragma once

#include <stdexcept>
#include <string>

namespace xbarsim {

/// Circuit has no usable excitation path (e.g. all conductances zero with
/// all parasitics zero), or the assembled nodal system is singular.
class DegenerateCircuitError : public std::runtime_error {
 public:
  explicit DegenerateCircuitError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Iterative solve did not reach the requested tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// DistortionCache used past its refresh interval.
class StaleCacheError : public std::runtime_error {
 public:
  explicit StaleCacheError(const std::string& what)
      : std::runtime_error(what) {}
};

/// Operation called in a state that does not allow it (e.g. backward before
/// forward, calibrating an empty calibrator).
class StateError : public std::runtime_error {
 public:
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration is invalid; message names the offending fields.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xbarsim
