#pragma once

#include <stdexcept>
#include <string>

namespace tubal {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  non_real,
  convergence,
  divergence,
  config,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// C layer can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& what);

}  // namespace tubal
