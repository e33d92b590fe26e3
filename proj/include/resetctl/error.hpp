#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace resetctl {

enum class ErrorKind {
  dimension,
  domain,
  singular,
  discretization,
  divergence,
  oracle_unsettled,
  invalid_context,
  guarantee_void,
  unsupported_topology,
  window,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::domain: return "domain";
    case ErrorKind::singular: return "singular";
    case ErrorKind::discretization: return "discretization";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::oracle_unsettled: return "oracle-unsettled";
    case ErrorKind::invalid_context: return "invalid-context";
    case ErrorKind::guarantee_void: return "guarantee-void";
    case ErrorKind::unsupported_topology: return "unsupported-topology";
    case ErrorKind::window: return "window";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the simulator when a state or output becomes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(double time, const std::string& what)
      : Error(ErrorKind::divergence, what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace resetctl
