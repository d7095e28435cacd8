#pragma once

// Central finite-difference checks of tape gradients in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "abya/autodiff/ops.hpp"

namespace abya::test {

using ad::Tape;
using ad::Tensor;
using ad::Var;

inline constexpr double kStep = 1e-3;         // finite-difference h
inline constexpr double kTolerance = 1e-4;    // max relative error
inline constexpr double kRelativeFloor = 1e-2;  // denominators below this count as this

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelativeFloor});
}

/// Builds a scalar from leaf variables (one per input tensor).
using ScalarFn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheck {
  double max_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares d f / d inputs with central differences on every coordinate (or on
/// `max_coords` randomly chosen ones per input when positive).
inline GradCheck check_gradients(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                                 std::size_t max_coords = 0, unsigned seed = 0) {
  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.variable(x));
    return tape.value(f(tape, vars))[0];
  };
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  Var out = f(tape, vars);
  tape.backward(out);

  GradCheck result;
  std::mt19937 rng(seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> analytic(inputs[k].size(), 0.0);
    auto g = tape.grad(vars[k]);
    if (!g.empty()) std::copy(g.begin(), g.end(), analytic.begin());
    std::vector<std::size_t> coords(inputs[k].size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords > 0 && coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    for (std::size_t i : coords) {
      auto plus = inputs;
      auto minus = inputs;
      plus[k][i] += kStep;
      minus[k][i] -= kStep;
      const double numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * kStep);
      result.max_error = std::max(result.max_error, relative_error(analytic[i], numeric));
      ++result.coordinates;
    }
  }
  return result;
}

/// Uniform tensor on [lo, hi].
inline Tensor<double> random_tensor(ad::Shape dims, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Uniform values kept at least `gap` away from every point in `kinks`.
inline Tensor<double> away_from(ad::Shape dims, std::mt19937_64& rng, std::vector<double> kinks,
                                double lo = -2.0, double hi = 2.0, double gap = 0.05) {
  Tensor<double> t(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) {
    bool ok = false;
    while (!ok) {
      v = u(rng);
      ok = std::none_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(v - k) < gap; });
    }
  }
  return t;
}

/// sum(w * y) for a random weighting w fixed by `seed`, turning any output
/// into a scalar. Deterministic, so it can sit inside a ScalarFn.
inline Var project(Tape<double>& tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> w = random_tensor(tape.dims(y), rng);
  return ad::sum(tape, ad::mul(tape, y, tape.constant(std::move(w))));
}

/// One named family of random gradient checks.
struct PrimitiveCase {
  std::string name;
  std::function<GradCheck(std::mt19937_64&)> run;  // one random configuration
};

/// Every differentiable primitive and both losses.
std::vector<PrimitiveCase> primitive_cases();

inline constexpr std::size_t kCasesPerPrimitive = 100;

}  // namespace abya::test
