#pragma once

#include <span>
#include <vector>

namespace abya::training {

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> value_targets;  // advantage + value
};

/// Generalized advantage estimation by reverse scan over one finished
/// episode. `rewards[t]` is the environment reward after the action at t; the
/// value after the last step is taken as zero.
AdvantageEstimate compute_gae(std::span<const double> rewards, std::span<const double> values,
                              double gamma, double lambda);

/// Discounted return following each step: G_t = sum_k gamma^(k-t) r_k.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

}  // namespace abya::training
