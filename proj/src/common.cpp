#include "midl/common.hpp"

#include <charconv>
#include <cmath>

namespace midl {

const char* error_tag(ErrorCode code) {
  switch (code) {
    case ErrorCode::Domain: return "E_DOMAIN";
    case ErrorCode::Shape: return "E_SHAPE";
    case ErrorCode::NonFinite: return "E_NONFINITE";
    case ErrorCode::Dataset: return "E_DATASET";
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Config: return "E_CONFIG";
    case ErrorCode::Argument: return "E_ARG";
    case ErrorCode::State: return "E_STATE";
    case ErrorCode::Unsatisfiable: return "E_UNSATISFIABLE";
    case ErrorCode::UndefinedPenalty: return "E_UNDEFINED_PENALTY";
  }
  return "E_UNKNOWN";
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFinite, std::string("non-finite ") + what);
  }
}

std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::Io, "cannot format real");
  return std::string(buf, end);
}

}  // namespace midl
