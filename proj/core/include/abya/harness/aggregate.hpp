#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace abya::harness {

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;
};

/// Mean and sample std of per-seed values. A single value gets std 0 and a
/// warning on stderr.
Summary aggregate(const std::vector<double>& values);

/// `count` consecutive seeds starting at `base`.
std::vector<std::uint64_t> seed_list(std::uint64_t base, std::size_t count = 7);

/// True once the last value differs from the one `window` entries earlier by
/// less than `delta`.
bool has_converged(const std::vector<double>& moving_average, std::size_t window, double delta);

}  // namespace abya::harness
