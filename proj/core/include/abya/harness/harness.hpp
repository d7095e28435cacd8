#pragma once

// Experimental protocols: training, transfer to a harder environment,
// evaluation, and language-model pretraining.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abya/io/checkpoint.hpp"
#include "abya/io/metrics.hpp"
#include "abya/training/config.hpp"
#include "abya/training/pretrain.hpp"

namespace abya::harness {

struct RunResult {
  std::vector<double> returns;
  std::vector<double> moving_average;  // 100-episode window
  std::vector<double> syntax_error_rate;
  std::map<std::string, std::size_t> question_histogram;
  double final_moving_average = 0.0;
  std::size_t episodes = 0;
  bool converged = false;
};

struct RunOptions {
  bool write_files = true;  // metrics.csv, transcripts.jsonl, final.ckpt under cfg.out_dir
  bool learn = true;
  bool stop_on_convergence = true;
  std::function<void(const io::MetricsRow&)> progress;
};

struct TrainedRun {
  RunResult result;
  io::Checkpoint checkpoint;
};

struct PretrainedLm {
  io::Checkpoint checkpoint;  // question-policy parameters only
  training::PretrainReport report;
};

/// Pretrains the question policy on the grammar corpus.
PretrainedLm pretrain_language_model(std::uint64_t seed, const training::PretrainOptions& options = {});

/// Fresh parameters for cfg.model; the question policy comes from `lm`.
ad::ParamSet<float> initial_parameters(const training::TrainConfig& cfg, const io::Checkpoint* lm);

/// Trains from scratch (apart from the pretrained LM) in cfg.env.
TrainedRun run_training(const training::TrainConfig& cfg, const io::Checkpoint* lm,
                        const RunOptions& options = {});

/// Continues training a checkpoint in cfg.env; cfg.oracle must not be Train.
TrainedRun run_transfer(const io::Checkpoint& ckpt, const training::TrainConfig& cfg,
                        const RunOptions& options = {});

/// Runs a checkpoint without updates.
RunResult run_eval(const io::Checkpoint& ckpt, const training::TrainConfig& cfg);

/// Shared loop: runs up to cfg.episodes episodes on the given parameters.
TrainedRun run_episodes(const training::TrainConfig& cfg, ad::ParamSet<float> params,
                        ad::AdamState<float> adam, const RunOptions& options);

}  // namespace abya::harness
