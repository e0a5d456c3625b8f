#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

// Invalid arguments are reported with std::invalid_argument; the types below
// cover the failure modes that carry extra state.
namespace eviflow {

/// An iterative solver stopped at its iteration cap.
class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(const std::string& what, double last_value)
      : std::runtime_error(what), last_value_(last_value) {}

  /// Last marginal violation (transport) or objective value (JKO).
  double last_value() const noexcept { return last_value_; }

 private:
  double last_value_;
};

/// A graph space has a pair of points with no connecting path.
class DisconnectedGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A measure trajectory is not concentrated on a single point.
class NotConcentratedError : public std::runtime_error {
 public:
  NotConcentratedError(const std::string& what, double time, double variance)
      : std::runtime_error(what), time_(time), variance_(variance) {}

  double time() const noexcept { return time_; }
  double variance() const noexcept { return variance_; }

 private:
  double time_;
  double variance_;
};

/// A check cannot be evaluated, e.g. a level that is never reached.
class NotApplicableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. line() is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace eviflow
