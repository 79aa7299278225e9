#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvpes {

enum class ErrorKind {
  invalid_argument,
  invalid_state,
  invalid_reset,
  stiffness,
  cutoff_overflow,
  grid,
  shape,
  horizon,
  truncated_distribution,
  aliasing,
  empty_curve,
  fit_failure,
  config,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::invalid_reset: return "invalid-reset";
    case ErrorKind::stiffness: return "stiffness";
    case ErrorKind::cutoff_overflow: return "cutoff-overflow";
    case ErrorKind::grid: return "grid";
    case ErrorKind::shape: return "shape";
    case ErrorKind::horizon: return "horizon";
    case ErrorKind::truncated_distribution: return "truncated-distribution";
    case ErrorKind::aliasing: return "aliasing";
    case ErrorKind::empty_curve: return "empty-curve";
    case ErrorKind::fit_failure: return "fit-failure";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
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

/// Config errors carry the 1-based line they were raised on (0 when not tied to a line).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what)
      : Error(ErrorKind::config, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace nvpes
