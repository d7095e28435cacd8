#pragma once

// Per-episode objectives. Both are maximized; the optimizer steps on their
// negation.

#include <span>
#include <stdexcept>
#include <vector>

#include "abya/autodiff/ops.hpp"

namespace abya::training {

using ad::Var;

struct ActionLossWeights {
  double clip_epsilon = 0.2;
  double value = 1.0;    // c1
  double entropy = 0.1;  // c2
};

struct QuestionLossWeights {
  double question_reward = 0.25;  // c3
  double episode_return = 1.0;    // c4
  double entropy = 0.2;           // c5
};

template <typename T>
struct ActionStep {
  Var log_prob;  // log pi(a_t | ...) under the current parameters
  T old_log_prob;
  Var value;
  Var entropy;
};

template <typename T>
struct QuestionStep {
  Var log_prob;  // ln pi^q(q_t | ...), summed over tokens
  Var entropy;   // mean token entropy
  double reward;
};

template <typename T>
struct ActionLoss {
  Var total;
  Var clip;
  Var value;
  Var entropy;
};

/// A * min(r, clip(r, 1 - eps, 1 + eps)) with r = exp(log_prob - old_log_prob).
template <typename T>
Var clipped_surrogate(ad::Tape<T>& tape, Var log_prob, T old_log_prob, double advantage,
                      double epsilon) {
  Var ratio = ad::exp(tape, ad::add_scalar(tape, log_prob, -old_log_prob));
  Var clipped = ad::clamp(tape, ratio, static_cast<T>(1.0 - epsilon), static_cast<T>(1.0 + epsilon));
  return ad::scale(tape, ad::minimum(tape, ratio, clipped), static_cast<T>(advantage));
}

/// Mean over steps of [L^clip - c1 * huber(V - V^target) + c2 * H].
template <typename T>
ActionLoss<T> action_loss(ad::Tape<T>& tape, std::span<const ActionStep<T>> steps,
                          std::span<const double> advantages, std::span<const double> targets,
                          const ActionLossWeights& w) {
  if (steps.empty() || steps.size() != advantages.size() || steps.size() != targets.size()) {
    throw std::invalid_argument("action_loss: step, advantage and target counts differ");
  }
  std::vector<Var> clip_terms, value_terms, entropy_terms;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& s = steps[t];
    clip_terms.push_back(clipped_surrogate(tape, s.log_prob, s.old_log_prob, advantages[t], w.clip_epsilon));
    Var err = ad::add_scalar(tape, s.value, static_cast<T>(-targets[t]));
    value_terms.push_back(ad::huber(tape, err));
    entropy_terms.push_back(s.entropy);
  }
  const T inv_n = T{1} / static_cast<T>(steps.size());
  ActionLoss<T> out;
  out.clip = ad::scale(tape, ad::add_n(tape, clip_terms), inv_n);
  out.value = ad::scale(tape, ad::add_n(tape, value_terms), inv_n);
  out.entropy = ad::scale(tape, ad::add_n(tape, entropy_terms), inv_n);
  out.total = ad::add_n(tape, std::vector<Var>{out.clip, ad::scale(tape, out.value, static_cast<T>(-w.value)),
                                               ad::scale(tape, out.entropy, static_cast<T>(w.entropy))});
  return out;
}

/// Mean over steps of [(c3 r^q + c4 G) ln pi^q + c5 H[pi^q]].
template <typename T>
Var question_loss(ad::Tape<T>& tape, std::span<const QuestionStep<T>> steps,
                  std::span<const double> returns, const QuestionLossWeights& w) {
  if (steps.empty() || steps.size() != returns.size()) {
    throw std::invalid_argument("question_loss: step and return counts differ");
  }
  std::vector<Var> terms;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const double weight = w.question_reward * steps[t].reward + w.episode_return * returns[t];
    terms.push_back(ad::scale(tape, steps[t].log_prob, static_cast<T>(weight)));
    terms.push_back(ad::scale(tape, steps[t].entropy, static_cast<T>(w.entropy)));
  }
  return ad::scale(tape, ad::add_n(tape, terms), T{1} / static_cast<T>(steps.size()));
}

}  // namespace abya::training
