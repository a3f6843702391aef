#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dslit {

enum class ErrorKind {
  invalid_parameter,
  out_of_range,
  composition,
  degenerate_source,
  normalization,
  invalid_coherence,
  invalid_pdf,
  under_determined,
  empty_estimate,
  format,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid parameter";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::composition: return "composition error";
    case ErrorKind::degenerate_source: return "degenerate source";
    case ErrorKind::normalization: return "normalization error";
    case ErrorKind::invalid_coherence: return "invalid coherence";
    case ErrorKind::invalid_pdf: return "invalid pdf";
    case ErrorKind::under_determined: return "under-determined";
    case ErrorKind::empty_estimate: return "empty estimate";
    case ErrorKind::format: return "format error";
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "I/O error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed frame file; carries the byte offset at which the problem was found.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error(ErrorKind::format, what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace dslit
