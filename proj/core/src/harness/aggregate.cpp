#include "abya/harness/aggregate.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace abya::harness {

Summary aggregate(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("aggregate: need at least one seed");
  Summary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n == 1) {
    std::cerr << "warning: aggregate over a single seed, std reported as 0\n";
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(base + i);
  return out;
}

bool has_converged(const std::vector<double>& ma, std::size_t window, double delta) {
  if (window == 0 || ma.size() <= window) return false;
  return std::abs(ma.back() - ma[ma.size() - 1 - window]) < delta;
}

}  // namespace abya::harness
