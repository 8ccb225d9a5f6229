#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace airwrite {

enum class ErrorKind {
  invalid_shape,
  empty_input,
  invalid_probability,
  invalid_root,
  numeric_failure,
  too_short,
  invalid_config,
  infeasible_target,
  oracle_too_large,
  undefined_metric,
  integrity,
  version,
  config_mismatch,
  parse,
  non_monotone,
  too_large,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_shape: return "invalid_shape";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::invalid_probability: return "invalid_probability";
    case ErrorKind::invalid_root: return "invalid_root";
    case ErrorKind::numeric_failure: return "numeric_failure";
    case ErrorKind::too_short: return "too_short";
    case ErrorKind::invalid_config: return "invalid_config";
    case ErrorKind::infeasible_target: return "infeasible_target";
    case ErrorKind::oracle_too_large: return "oracle_too_large";
    case ErrorKind::undefined_metric: return "undefined_metric";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::version: return "version";
    case ErrorKind::config_mismatch: return "config_mismatch";
    case ErrorKind::parse: return "parse";
    case ErrorKind::non_monotone: return "non_monotone";
    case ErrorKind::too_large: return "too_large";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI exit
// codes, the HTTP error bodies) can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace airwrite
