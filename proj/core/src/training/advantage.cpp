#include "abya/training/advantage.hpp"

#include <stdexcept>

namespace abya::training {

AdvantageEstimate compute_gae(std::span<const double> rewards, std::span<const double> values,
                              double gamma, double lambda) {
  if (rewards.empty()) throw std::invalid_argument("compute_gae: empty episode");
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("compute_gae: rewards and values differ in length");
  }
  const std::size_t n = rewards.size();
  AdvantageEstimate out;
  out.advantages.assign(n, 0.0);
  out.value_targets.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.value_targets[t] = running + values[t];
  }
  return out;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size(), 0.0);
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

}  // namespace abya::training
