#include "abya/agent/agent.hpp"

#include <stdexcept>

namespace abya::agent {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Main: return "main";
    case ModelKind::Film: return "film";
    case ModelKind::Baseline: return "baseline";
  }
  return "?";
}

ModelKind model_from_name(std::string_view name) {
  if (name == "main") return ModelKind::Main;
  if (name == "film") return ModelKind::Film;
  if (name == "baseline") return ModelKind::Baseline;
  throw std::invalid_argument("unknown model kind: " + std::string(name));
}

}  // namespace abya::agent
