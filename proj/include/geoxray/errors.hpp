#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geoxray {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chart point or parameter lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A geodesic leaves M before reaching the requested time.
class OutOfDomain : public DomainError {
 public:
  OutOfDomain(const std::string& what, double exit_time)
      : DomainError(what), exit_time_(exit_time) {}
  double exit_time() const noexcept { return exit_time_; }

 private:
  double exit_time_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Conjugate points, trapping, or a non-convex boundary were detected.
class SimplicityViolation : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failure (Newton or Krylov); carries the residual history.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace geoxray
