#pragma once

#include <stdexcept>
#include <string>

namespace falign {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two fields that must share a grid do not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Raised by the time integrator; carries the simulation time at failure.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Density touched (or started below) the vacuum threshold.
class VacuumError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Malformed scenario configuration. `line` is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Snapshot or CSV file could not be read back.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace falign
