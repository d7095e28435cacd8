#include "abya/training/config.hpp"

#include <stdexcept>

namespace abya::training {

TrainConfig TrainConfig::defaults(agent::ModelKind kind) {
  TrainConfig c;
  c.model = kind;
  switch (kind) {
    case agent::ModelKind::Main:
      c.alpha = 0.0005;
      c.eps_clip = 0.2;
      c.c5 = 0.2;
      break;
    case agent::ModelKind::Film:
      c.alpha = 0.0001;
      c.eps_clip = 0.15;
      c.c5 = 0.5;
      break;
    case agent::ModelKind::Baseline:
      c.alpha = 0.001;
      c.eps_clip = 0.2;
      break;
  }
  return c;
}

}  // namespace abya::training
