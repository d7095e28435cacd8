#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>

namespace abya {

/// Engine used for every stochastic choice; its output sequence is fixed by
/// the standard, so runs reproduce from a seed.
using Rng = std::mt19937_64;

struct CategoricalDraw {
  std::size_t index;
  double log_prob;
};

/// Draws an index with the given probabilities.
template <typename T>
CategoricalDraw sample_categorical(std::span<const T> probs, Rng& rng) {
  double total = 0.0;
  for (T p : probs) {
    if (!std::isfinite(static_cast<double>(p)) || p < T{0}) {
      throw std::invalid_argument("sample_categorical: probabilities must be finite and >= 0");
    }
    total += static_cast<double>(p);
  }
  if (probs.empty() || total == 0.0) {
    throw std::invalid_argument("sample_categorical: all-zero distribution");
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("sample_categorical: probabilities sum to " +
                                std::to_string(total));
  }
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double cumulative = 0.0;
  std::size_t chosen = probs.size() - 1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += static_cast<double>(probs[i]);
    if (u < cumulative) {
      chosen = i;
      break;
    }
  }
  // Guard against landing on a zero-probability tail through rounding.
  while (probs[chosen] == T{0} && chosen > 0) --chosen;
  return {chosen, std::log(static_cast<double>(probs[chosen]))};
}

}  // namespace abya
