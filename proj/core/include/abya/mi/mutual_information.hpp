#pragma once

// Monte-Carlo estimate of I(a; q) = H(a) - H(a | q) for one decision step,
// with the marginal p(a) approximated by averaging p(a | q_n) over questions
// drawn from the question policy.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "abya/agent/agent.hpp"
#include "abya/autodiff/ops.hpp"
#include "abya/oracle/oracle.hpp"

namespace abya::mi {

struct MiEstimate {
  double value = 0.0;  // nats
  std::size_t samples = 0;
  std::vector<double> marginal;
};

double entropy(const std::vector<double>& probs);

/// Estimate from N sampled conditionals p(a | q_n), each a distribution over
/// the same action set.
MiEstimate mutual_information(const std::vector<std::vector<double>>& conditionals);

/// Draws `samples` questions with `draw()` and maps each to an action
/// distribution with `conditional(q)`.
template <typename Draw, typename Conditional>
MiEstimate estimate_mi(std::size_t samples, Draw&& draw, Conditional&& conditional) {
  if (samples < 2) throw std::invalid_argument("estimate_mi: need at least 2 samples");
  std::vector<std::vector<double>> conditionals;
  conditionals.reserve(samples);
  for (std::size_t n = 0; n < samples; ++n) conditionals.push_back(conditional(draw()));
  return mutual_information(conditionals);
}

/// Differentiable form over probability-vector nodes.
template <typename T>
ad::Var mutual_information(ad::Tape<T>& tape, const std::vector<ad::Var>& conditionals) {
  if (conditionals.size() < 2) throw std::invalid_argument("mutual_information: need at least 2 samples");
  const T inv_n = T{1} / static_cast<T>(conditionals.size());
  ad::Var marginal = ad::scale(tape, ad::add_n(tape, conditionals), inv_n);
  std::vector<ad::Var> component_entropies;
  for (ad::Var p : conditionals) component_entropies.push_back(ad::entropy_of_probs(tape, p));
  ad::Var mean_conditional = ad::scale(tape, ad::add_n(tape, component_entropies), inv_n);
  return ad::sub(tape, ad::entropy_of_probs(tape, marginal), mean_conditional);
}

/// loss + weight * I; the identity when weight is zero.
template <typename T>
ad::Var mi_augmented_loss(ad::Tape<T>& tape, ad::Var loss, ad::Var mi, double weight) {
  if (weight == 0.0) return loss;
  return ad::add(tape, loss, ad::scale(tape, mi, static_cast<T>(weight)));
}

template <typename T>
struct AgentMiEstimate {
  ad::Var value;  // differentiable estimate
  MiEstimate summary;
};

/// Samples N questions from the agent's question policy at one step, asks the
/// Oracle each, and evaluates the action policy on every question-answer pair.
template <typename T>
AgentMiEstimate<T> estimate_agent_mi(agent::Forward<T>& fwd, const agent::ObsEncoding<T>& obs,
                                     ad::Var memory, std::size_t samples,
                                     const grid::WorldState& state, oracle::Mode mode, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("estimate_agent_mi: need at least 2 samples");
  if (!agent::asks_questions(fwd.kind())) {
    throw std::logic_error("estimate_agent_mi: model kind has no question policy");
  }
  auto& tape = fwd.tape();
  std::vector<ad::Var> conditionals;
  std::vector<std::vector<double>> values;
  for (std::size_t n = 0; n < samples; ++n) {
    auto q = fwd.ask(obs.embedding, memory, &rng);
    const auto ans = oracle::answer(q.tokens, state, mode, rng);
    ad::Var eta = fwd.answer_vector(ans.eta);
    agent::ActionHead<T> head;
    if (fwd.kind() == agent::ModelKind::Film) {
      ad::Var conditioned = fwd.film_condition(obs.features, fwd.qa_encoding(q.embedding, eta, q.final_hidden));
      head = fwd.act(conditioned, memory);
    } else {
      head = fwd.act(obs.embedding, memory, q.embedding, eta, q.final_hidden);
    }
    conditionals.push_back(ad::exp(tape, head.log_probs));
    values.emplace_back(head.probs.begin(), head.probs.end());
  }
  return {mutual_information(tape, conditionals), mutual_information(values)};
}

}  // namespace abya::mi
