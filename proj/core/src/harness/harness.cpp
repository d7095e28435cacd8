#include "abya/harness/harness.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include "abya/harness/aggregate.hpp"
#include "abya/io/config_file.hpp"
#include "abya/io/transcript.hpp"
#include "abya/training/trainer.hpp"

namespace abya::harness {

PretrainedLm pretrain_language_model(std::uint64_t seed, const training::PretrainOptions& options) {
  auto params = agent::make_params<float>(agent::ModelKind::Main, seed);
  training::PretrainOptions opt = options;
  opt.seed = seed;
  PretrainedLm out;
  out.report = training::pretrain_lm(params, oracle::enumerate_grammar(), opt);
  for (const auto& e : params.entries()) {
    if (e.group == ad::Group::Question) out.checkpoint.params.add(e.name, e.group, e.value);
  }
  return out;
}

ad::ParamSet<float> initial_parameters(const training::TrainConfig& cfg, const io::Checkpoint* lm) {
  auto params = agent::make_params<float>(cfg.model, cfg.seed);
  if (agent::asks_questions(cfg.model)) {
    if (lm == nullptr) throw std::invalid_argument("model '" + std::string(agent::model_name(cfg.model)) +
                                                   "' needs a pretrained language model");
    io::restore_language_model(*lm, params);
  }
  return params;
}

TrainedRun run_episodes(const training::TrainConfig& cfg, ad::ParamSet<float> params,
                        ad::AdamState<float> adam, const RunOptions& options) {
  const auto env = grid::EnvConfig::from_name(cfg.env);
  training::Trainer<float> trainer(cfg, std::move(params), std::move(adam));
  const std::filesystem::path dir = cfg.out_dir;
  std::unique_ptr<io::MetricsWriter> metrics;
  std::unique_ptr<io::TranscriptWriter> transcripts;
  if (options.write_files) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "config.txt") << io::to_text(cfg);
    metrics = std::make_unique<io::MetricsWriter>(dir / "metrics.csv");
    transcripts = std::make_unique<io::TranscriptWriter>(dir / "transcripts.jsonl");
  }

  TrainedRun run;
  RunResult& r = run.result;
  io::MovingAverage ma(100);
  const bool asks = agent::asks_questions(cfg.model);
  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    auto observer = [&](const training::EpisodeBuffer& buf) {
      for (const auto& s : buf.steps) {
        if (asks) ++r.question_histogram[oracle::to_text(s.question)];
      }
      if (!transcripts || cfg.transcript_every == 0 || episode % cfg.transcript_every != 0) return;
      for (std::size_t t = 0; t < buf.steps.size(); ++t) {
        const auto& s = buf.steps[t];
        io::TranscriptRecord rec;
        rec.episode = episode;
        rec.t = t;
        rec.question = asks ? oracle::to_text(s.question) : "";
        rec.verdict = asks ? std::string(oracle::verdict_name(s.answer.verdict)) : "";
        rec.eta = s.answer.eta;
        rec.r_q = s.answer.reward;
        rec.action = s.action;
        rec.r_e = s.reward;
        rec.done = s.done;
        if (t == 0) rec.grid = buf.initial_layout;
        transcripts->write(rec);
      }
    };
    const auto m = trainer.run_episode(env, episode, options.learn, observer);
    io::MetricsRow row;
    row.episode = episode;
    row.episode_return = m.episode_return;
    row.length = m.length;
    row.ma100 = ma.push(m.episode_return);
    row.loss_a = m.update.loss_action;
    row.loss_q = m.update.loss_question;
    row.syntax_err_rate = m.syntax_error_rate;
    if (metrics) metrics->write(row);
    if (options.progress) options.progress(row);
    r.returns.push_back(m.episode_return);
    r.moving_average.push_back(row.ma100);
    r.syntax_error_rate.push_back(m.syntax_error_rate);
    if (options.stop_on_convergence && episode + 1 >= cfg.min_episodes &&
        has_converged(r.moving_average, cfg.converge_window, cfg.converge_delta)) {
      r.converged = true;
      break;
    }
  }
  r.episodes = r.returns.size();
  r.final_moving_average = r.moving_average.empty() ? 0.0 : r.moving_average.back();

  run.checkpoint.model = cfg.model;
  run.checkpoint.params = trainer.params();
  run.checkpoint.adam = trainer.adam();
  if (options.write_files) io::save_checkpoint(dir / "final.ckpt", run.checkpoint);
  return run;
}

TrainedRun run_training(const training::TrainConfig& cfg, const io::Checkpoint* lm, const RunOptions& options) {
  return run_episodes(cfg, initial_parameters(cfg, lm), {}, options);
}

TrainedRun run_transfer(const io::Checkpoint& ckpt, const training::TrainConfig& cfg, const RunOptions& options) {
  if (cfg.oracle == oracle::Mode::Train) {
    throw std::invalid_argument("transfer runs use the test or random Oracle, not train");
  }
  auto params = agent::make_params<float>(cfg.model, cfg.seed);
  ad::AdamState<float> adam;
  io::restore(ckpt, cfg.model, params, &adam);
  RunOptions opt = options;
  opt.stop_on_convergence = false;
  return run_episodes(cfg, std::move(params), std::move(adam), opt);
}

RunResult run_eval(const io::Checkpoint& ckpt, const training::TrainConfig& cfg) {
  auto params = agent::make_params<float>(cfg.model, cfg.seed);
  io::restore(ckpt, cfg.model, params);
  RunOptions opt;
  opt.write_files = false;
  opt.learn = false;
  opt.stop_on_convergence = false;
  return run_episodes(cfg, std::move(params), {}, opt).result;
}

}  // namespace abya::harness
