#include "abya/mi/mutual_information.hpp"

namespace abya::mi {

double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

MiEstimate mutual_information(const std::vector<std::vector<double>>& conditionals) {
  if (conditionals.size() < 2) throw std::invalid_argument("mutual_information: need at least 2 samples");
  const std::size_t actions = conditionals.front().size();
  MiEstimate out;
  out.samples = conditionals.size();
  out.marginal.assign(actions, 0.0);
  double mean_conditional = 0.0;
  for (const auto& p : conditionals) {
    if (p.size() != actions) throw std::invalid_argument("mutual_information: ragged conditionals");
    for (std::size_t a = 0; a < actions; ++a) out.marginal[a] += p[a];
    mean_conditional += entropy(p);
  }
  const double n = static_cast<double>(conditionals.size());
  for (double& v : out.marginal) v /= n;
  out.value = entropy(out.marginal) - mean_conditional / n;
  return out;
}

}  // namespace abya::mi
