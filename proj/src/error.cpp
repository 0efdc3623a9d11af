#include "tubal/error.hpp"

namespace tubal {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::non_real: return "non-real spectrum";
    case ErrorCode::convergence: return "convergence failure";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::io: return "i/o error";
  }
  return "unknown";
}

void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace tubal
