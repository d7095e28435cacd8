#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "abya/agent/agent.hpp"
#include "abya/oracle/oracle.hpp"
#include "abya/training/losses.hpp"

namespace abya::training {

struct TrainConfig {
  agent::ModelKind model = agent::ModelKind::Main;
  std::string env = "MultiRoom-N2-S4";
  oracle::Mode oracle = oracle::Mode::Train;
  double alpha = 0.0005;
  double eps_clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double c1 = 1.0;
  double c2 = 0.1;
  double c3 = 0.25;
  double c4 = 1.0;
  double c5 = 0.2;
  bool mi_enabled = false;
  std::size_t mi_samples = 8;
  double mi_weight = 0.0;
  std::size_t episodes = 30000;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::size_t update_epochs = 1;
  std::size_t transcript_every = 100;  // 0 disables transcripts
  // Stop once the 100-episode moving average moves by less than
  // converge_delta over converge_window episodes (0 disables).
  std::size_t converge_window = 500;
  double converge_delta = 0.01;
  std::size_t min_episodes = 2000;  // no convergence stop before this

  /// Tuned hyperparameters for a model kind; other fields keep their defaults.
  static TrainConfig defaults(agent::ModelKind kind);

  ActionLossWeights action_weights() const { return {eps_clip, c1, c2}; }
  QuestionLossWeights question_weights() const { return {c3, c4, c5}; }
};

}  // namespace abya::training
