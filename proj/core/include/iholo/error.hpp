#pragma once

#include <stdexcept>
#include <string>

namespace iholo {

/// Failure classes. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  config,   ///< invalid configuration or arguments
  io,       ///< file system or stream failure
  format,   ///< malformed input data
  numeric,  ///< a numerical procedure failed (fit, degenerate data)
  no_data,  ///< input is valid but empty (e.g. no coincidences)
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error config_error(const std::string &what) { return {ErrorKind::config, what}; }
inline Error io_error(const std::string &what) { return {ErrorKind::io, what}; }
inline Error numeric_error(const std::string &what) { return {ErrorKind::numeric, what}; }

} // namespace iholo
