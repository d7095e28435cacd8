#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <set>
#include <string>
#include <unordered_map>

#include "abya/autodiff/param_set.hpp"

namespace abya::ad {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators keyed by parameter name.
template <typename T>
struct AdamState {
  std::unordered_map<std::string, Tensor<T>> first_moment;
  std::unordered_map<std::string, Tensor<T>> second_moment;
  std::uint64_t step = 0;
};

/// One Adam update minimizing along `grads`. Frozen parameters are skipped; a
/// trainable parameter without a gradient is treated as having zero gradient
/// (reported once per name).
template <typename T>
void adam_step(ParamSet<T>& params, const GradientMap<T>& grads, AdamState<T>& state,
               double learning_rate, const AdamHyper& hyper = {}) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam_step: learning rate must be > 0");
  static std::set<std::string> reported;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(hyper.beta1, t);
  const double bias2 = 1.0 - std::pow(hyper.beta2, t);
  for (auto& e : params.entries()) {
    if (e.frozen) continue;
    auto& m = state.first_moment.try_emplace(e.name, e.value.dims()).first->second;
    auto& v = state.second_moment.try_emplace(e.name, e.value.dims()).first->second;
    if (m.dims() != e.value.dims() || v.dims() != e.value.dims()) {
      throw DimensionError("adam state for " + e.name, m.dims(), e.value.dims());
    }
    auto it = grads.find(e.name);
    const Tensor<T>* g = it == grads.end() ? nullptr : &it->second;
    if (g == nullptr && reported.insert(e.name).second) {
      std::cerr << "adam: no gradient for parameter " << e.name << ", using zero\n";
    }
    if (g != nullptr && g->dims() != e.value.dims()) {
      throw DimensionError("gradient for " + e.name, g->dims(), e.value.dims());
    }
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double gi = g == nullptr ? 0.0 : static_cast<double>((*g)[i]);
      const double mi = hyper.beta1 * static_cast<double>(m[i]) + (1.0 - hyper.beta1) * gi;
      const double vi = hyper.beta2 * static_cast<double>(v[i]) + (1.0 - hyper.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bias1;
      const double v_hat = vi / bias2;
      e.value[i] = static_cast<T>(static_cast<double>(e.value[i]) -
                                  learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
    }
  }
}

}  // namespace abya::ad
