#include "midl/ratio/weights.hpp"

namespace midl::ratio {

const char* g_mode_name(GMode mode) {
  switch (mode) {
    case GMode::ReverseKl: return "reverse-kl";
    case GMode::Literal: return "literal";
    case GMode::ModelKl: return "model-kl";
  }
  return "reverse-kl";
}

GMode g_mode_from_name(const std::string& name) {
  if (name == "reverse-kl") return GMode::ReverseKl;
  if (name == "literal") return GMode::Literal;
  if (name == "model-kl") return GMode::ModelKl;
  throw Error(ErrorCode::Config, "unknown g mode '" + name + "' (expected reverse-kl|literal|model-kl)");
}

}  // namespace midl::ratio
