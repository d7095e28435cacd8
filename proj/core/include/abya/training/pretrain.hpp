#pragma once

// Supervised pretraining of the question policy's language model on the
// grammar corpus, using teacher forcing from an all-zero context.

#include <algorithm>
#include <cstddef>
#include <iostream>
#include <numeric>
#include <vector>

#include "abya/agent/agent.hpp"
#include "abya/autodiff/adam.hpp"
#include "abya/oracle/oracle.hpp"

namespace abya::training {

using ad::Var;

struct PretrainOptions {
  double learning_rate = 0.005;
  std::size_t batch = 12;
  std::size_t max_epochs = 200;
  double target_loss = 0.3;  // mean nats per token
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct PretrainReport {
  std::vector<double> epoch_loss;  // mean nats per token after each epoch's updates
  double initial_loss = 0.0;
  std::size_t epochs = 0;
  bool reached_target = false;
};

namespace detail {

/// The question-group parameters of a full set, in their original order.
template <typename T>
ad::ParamSet<T> question_subset(const ad::ParamSet<T>& params) {
  ad::ParamSet<T> out;
  for (const auto& e : params.entries()) {
    if (e.group == ad::Group::Question) out.add(e.name, e.group, e.value, false);
  }
  if (out.size() == 0) throw std::invalid_argument("pretrain: parameter set has no question policy");
  return out;
}

template <typename T>
struct SentenceScore {
  ad::Var total_log_prob;
  std::size_t tokens = 0;
};

/// Teacher-forced log-likelihood of one <sos> ... <eos> sentence.
template <typename T>
SentenceScore<T> score_sentence(agent::Forward<T>& fwd, const oracle::Tokens& sentence) {
  if (sentence.size() < 2 || sentence.front() != oracle::vocab::kSos) {
    throw std::invalid_argument("pretrain: corpus sentence must start with <sos>");
  }
  auto& tape = fwd.tape();
  const auto& d = fwd.dims();
  std::vector<oracle::TokenId> targets(sentence.begin() + 1, sentence.end());
  Var e_obs = tape.constant(ad::Tensor<T>({d.obs_embedding}));
  Var h_mem = tape.constant(ad::Tensor<T>({d.memory}));
  auto q = fwd.ask(e_obs, h_mem, nullptr, &targets);
  return {q.log_prob, targets.size()};
}

}  // namespace detail

/// Mean per-token cross-entropy (nats) of the LM over a corpus.
template <typename T>
double corpus_cross_entropy(const ad::ParamSet<T>& params, const std::vector<oracle::Tokens>& corpus,
                            agent::ModelKind kind = agent::ModelKind::Main) {
  if (corpus.empty()) throw std::invalid_argument("corpus_cross_entropy: empty corpus");
  const auto subset = detail::question_subset(params);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& sentence : corpus) {
    ad::Tape<T> tape;
    ad::BoundParams<T> bound(tape, subset);
    agent::Forward<T> fwd(tape, bound, kind);
    const auto s = detail::score_sentence(fwd, sentence);
    nll -= static_cast<double>(tape.value(s.total_log_prob)[0]);
    tokens += s.tokens;
  }
  return nll / static_cast<double>(tokens);
}

/// Minimizes teacher-forced cross-entropy over `corpus` with Adam, updating
/// the question-group entries of `params` in place (word embedding included).
/// Stops at the target loss or the epoch cap, whichever comes first.
template <typename T>
PretrainReport pretrain_lm(ad::ParamSet<T>& params, const std::vector<oracle::Tokens>& corpus,
                           const PretrainOptions& opt = {}, agent::ModelKind kind = agent::ModelKind::Main) {
  if (corpus.empty()) throw std::invalid_argument("pretrain_lm: empty corpus");
  if (opt.batch == 0) throw std::invalid_argument("pretrain_lm: batch must be positive");
  auto subset = detail::question_subset(params);
  ad::AdamState<T> adam;
  Rng rng(opt.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  PretrainReport report;
  report.initial_loss = corpus_cross_entropy(subset, corpus, kind);
  for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      ad::Tape<T> tape;
      ad::BoundParams<T> bound(tape, subset);
      agent::Forward<T> fwd(tape, bound, kind);
      std::vector<Var> terms;
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto s = detail::score_sentence(fwd, corpus[order[i]]);
        terms.push_back(s.total_log_prob);
        tokens += s.tokens;
      }
      Var loss = ad::scale(tape, ad::add_n(tape, terms), T{-1} / static_cast<T>(tokens));
      const auto grads = ad::gradients(tape, loss, bound);
      ad::adam_step(subset, grads, adam, opt.learning_rate);
    }
    const double loss = corpus_cross_entropy(subset, corpus, kind);
    report.epoch_loss.push_back(loss);
    report.epochs = epoch + 1;
    if (opt.verbose) std::cerr << "pretrain epoch " << report.epochs << " loss " << loss << '\n';
    if (loss <= opt.target_loss) {
      report.reached_target = true;
      break;
    }
  }
  for (const auto& e : subset.entries()) params.at(e.name) = e.value;
  return report;
}

/// Samples one question from the LM at zero context.
template <typename T>
oracle::Tokens sample_question(const ad::ParamSet<T>& params, Rng& rng,
                               agent::ModelKind kind = agent::ModelKind::Main) {
  const auto subset = detail::question_subset(params);
  ad::Tape<T> tape;
  ad::BoundParams<T> bound(tape, subset);
  agent::Forward<T> fwd(tape, bound, kind);
  const auto& d = fwd.dims();
  Var e_obs = tape.constant(ad::Tensor<T>({d.obs_embedding}));
  Var h_mem = tape.constant(ad::Tensor<T>({d.memory}));
  return fwd.ask(e_obs, h_mem, &rng).tokens;
}

}  // namespace abya::training
