// abya: pretraining, training, transfer and evaluation from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "abya/harness/aggregate.hpp"
#include "abya/harness/harness.hpp"
#include "abya/io/checkpoint.hpp"
#include "abya/io/config_file.hpp"
#include "abya/io/metrics.hpp"
#include "abya/oracle/oracle.hpp"

namespace {

namespace fs = std::filesystem;
using abya::training::TrainConfig;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::string out_dir;
  std::string lm_path;
  std::size_t seeds = 1;
};

/// Turns leftover `--key=value` / `--key value` arguments into config entries.
std::vector<abya::io::ConfigEntry> overrides(const std::vector<std::string>& extras) {
  std::vector<abya::io::ConfigEntry> out;
  const auto& keys = abya::io::config_keys();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (!arg.starts_with("--")) throw UsageError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw UsageError("flag --" + key + " needs a value");
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw UsageError("unknown flag --" + key);
    out.push_back({key, value, "command line", 0});
  }
  return out;
}

TrainConfig load_config(const Common& c, const std::vector<std::string>& extras,
                        std::vector<abya::io::ConfigEntry> preset = {}) {
  std::vector<abya::io::ConfigEntry> entries = std::move(preset);
  if (!c.config_path.empty()) {
    auto file = abya::io::read_entries(fs::path(c.config_path));
    entries.insert(entries.end(), file.begin(), file.end());
  }
  auto cli = overrides(extras);
  entries.insert(entries.end(), cli.begin(), cli.end());
  if (c.seed) entries.push_back({"seed", std::to_string(*c.seed), "command line", 0});
  if (!c.out_dir.empty()) entries.push_back({"out_dir", c.out_dir, "command line", 0});
  return abya::io::build_config(entries);
}

void print_progress(const abya::io::MetricsRow& row) {
  if ((row.episode + 1) % 500 == 0) {
    std::cerr << "episode " << row.episode + 1 << " return " << row.episode_return << " ma100 " << row.ma100
              << '\n';
  }
}

abya::io::Checkpoint language_model(const Common& c, std::uint64_t seed) {
  if (!c.lm_path.empty()) return abya::io::load_checkpoint(c.lm_path);
  std::cerr << "no --lm given, pretraining the language model (seed " << seed << ")\n";
  auto lm = abya::harness::pretrain_language_model(seed);
  std::cerr << "pretraining finished after " << lm.report.epochs << " epochs, loss "
            << lm.report.epoch_loss.back() << " nats/token\n";
  return lm.checkpoint;
}

void report(const std::string& label, const std::vector<double>& finals) {
  const auto s = abya::harness::aggregate(finals);
  std::cout << label << ": " << s.mean << " +- " << s.std << " over " << s.n << " seed(s)\n";
}

int cmd_pretrain(const Common& c, std::size_t epochs) {
  const std::uint64_t seed = c.seed.value_or(0);
  abya::training::PretrainOptions opt;
  opt.max_epochs = epochs;
  opt.verbose = true;
  auto lm = abya::harness::pretrain_language_model(seed, opt);
  const fs::path dir = c.out_dir.empty() ? fs::path("out") : fs::path(c.out_dir);
  fs::create_directories(dir);
  abya::io::save_checkpoint(dir / "lm.ckpt", lm.checkpoint);
  std::ofstream curve(dir / "pretrain.csv");
  curve << "epoch,loss\n";
  for (std::size_t i = 0; i < lm.report.epoch_loss.size(); ++i) {
    curve << i + 1 << ',' << abya::io::format_number(lm.report.epoch_loss[i]) << '\n';
  }
  auto params = abya::agent::make_params<float>(abya::agent::ModelKind::Main, seed);
  abya::io::restore_language_model(lm.checkpoint, params);
  abya::Rng rng(seed + 1);
  std::size_t valid = 0;
  constexpr std::size_t kAudit = 1000;
  for (std::size_t i = 0; i < kAudit; ++i) {
    const auto q = abya::training::sample_question(params, rng);
    if (std::holds_alternative<abya::oracle::Predicate>(abya::oracle::parse(q))) ++valid;
  }
  std::cout << "initial loss " << lm.report.initial_loss << ", final loss " << lm.report.epoch_loss.back()
            << " after " << lm.report.epochs << " epochs\n"
            << "grammatical samples: " << valid << " / " << kAudit << '\n'
            << "wrote " << (dir / "lm.ckpt").string() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::vector<std::string>& extras) {
  const TrainConfig base = load_config(c, extras);
  std::vector<double> finals;
  for (std::uint64_t seed : abya::harness::seed_list(base.seed, c.seeds)) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    if (c.seeds > 1) cfg.out_dir = (fs::path(base.out_dir) / ("seed-" + std::to_string(seed))).string();
    std::optional<abya::io::Checkpoint> lm;
    if (abya::agent::asks_questions(cfg.model)) lm = language_model(c, seed);
    abya::harness::RunOptions opt;
    opt.progress = print_progress;
    const auto run = abya::harness::run_training(cfg, lm ? &*lm : nullptr, opt);
    std::cout << "seed " << seed << ": " << run.result.episodes << " episodes, final ma100 "
              << run.result.final_moving_average << (run.result.converged ? " (converged)" : "") << '\n';
    finals.push_back(run.result.final_moving_average);
  }
  report("train", finals);
  return 0;
}

int cmd_transfer(const Common& c, const std::vector<std::string>& extras, std::optional<std::string> oracle) {
  if (c.checkpoint.empty()) throw UsageError("--checkpoint is required");
  const auto ckpt = abya::io::load_checkpoint(c.checkpoint);
  if (!ckpt.model) throw abya::io::CheckpointError("checkpoint holds no trained agent");
  std::vector<abya::io::ConfigEntry> preset = {
      {"model", std::string(abya::agent::model_name(*ckpt.model)), "checkpoint", 0},
      {"env", "MultiRoom-N4-S5", "transfer defaults", 0},
      {"oracle", "test", "transfer defaults", 0},
  };
  if (oracle) preset.push_back({"oracle", *oracle, "command line", 0});
  const TrainConfig base = load_config(c, extras, preset);
  std::vector<double> finals;
  for (std::uint64_t seed : abya::harness::seed_list(base.seed, c.seeds)) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    if (c.seeds > 1) cfg.out_dir = (fs::path(base.out_dir) / ("seed-" + std::to_string(seed))).string();
    abya::harness::RunOptions opt;
    opt.progress = print_progress;
    const auto run = abya::harness::run_transfer(ckpt, cfg, opt);
    std::cout << "seed " << seed << ": " << run.result.episodes << " episodes, final ma100 "
              << run.result.final_moving_average << '\n';
    finals.push_back(run.result.final_moving_average);
  }
  report(std::string("transfer (") + std::string(abya::oracle::mode_name(base.oracle)) + " oracle)", finals);
  return 0;
}

int cmd_eval(const Common& c, const std::vector<std::string>& extras) {
  if (c.checkpoint.empty()) throw UsageError("--checkpoint is required");
  const auto ckpt = abya::io::load_checkpoint(c.checkpoint);
  if (!ckpt.model) throw abya::io::CheckpointError("checkpoint holds no trained agent");
  std::vector<abya::io::ConfigEntry> preset = {
      {"model", std::string(abya::agent::model_name(*ckpt.model)), "checkpoint", 0},
      {"oracle", "test", "eval defaults", 0},
      {"episodes", "100", "eval defaults", 0},
  };
  const TrainConfig cfg = load_config(c, extras, preset);
  const auto result = abya::harness::run_eval(ckpt, cfg);
  double total = 0.0;
  for (double r : result.returns) total += r;
  std::cout << "mean return " << total / static_cast<double>(result.returns.size()) << " over "
            << result.returns.size() << " episodes in " << cfg.env << '\n';
  return 0;
}

int cmd_enumerate() {
  for (const auto& s : abya::oracle::enumerate_grammar()) std::cout << abya::oracle::to_text(s) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent that learns to ask an Oracle questions in MultiRoom gridworlds"};
  app.require_subcommand(1);
  Common c;
  std::size_t epochs = 200;
  std::optional<std::string> oracle_override;

  auto add_common = [&](CLI::App* sub, bool extras) {
    sub->add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "run seed");
    sub->add_option("--out-dir", c.out_dir, "output directory");
    sub->allow_extras(extras);
  };

  auto* pretrain = app.add_subcommand("pretrain-lm", "pretrain the question language model on the grammar corpus");
  pretrain->add_option("--seed", c.seed, "run seed");
  pretrain->add_option("--out-dir", c.out_dir, "output directory");
  pretrain->add_option("--epochs", epochs, "epoch cap")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train an agent (MultiRoom-N2-S4 by default)");
  add_common(train, true);
  train->add_option("--lm", c.lm_path, "pretrained language-model checkpoint");
  train->add_option("--seeds", c.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* transfer = app.add_subcommand("transfer", "continue training a checkpoint in a new environment");
  add_common(transfer, true);
  transfer->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->check(CLI::ExistingFile);
  transfer->add_option("--seeds", c.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "transfer with an Oracle that answers at random");
  add_common(ablate, true);
  ablate->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->check(CLI::ExistingFile);
  ablate->add_option("--seeds", c.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "run a checkpoint without updates");
  add_common(eval, true);
  eval->add_option("--checkpoint", c.checkpoint, "trained checkpoint")->check(CLI::ExistingFile);

  auto* enumerate = app.add_subcommand("enumerate-grammar", "print every grammatical question");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*pretrain) return cmd_pretrain(c, epochs);
    if (*train) return cmd_train(c, train->remaining());
    if (*transfer) return cmd_transfer(c, transfer->remaining(), std::nullopt);
    if (*ablate) {
      for (const auto& a : ablate->remaining())
        if (a.starts_with("--oracle")) throw UsageError("ablate always uses the random Oracle");
      oracle_override = "random";
      return cmd_transfer(c, ablate->remaining(), oracle_override);
    }
    if (*eval) return cmd_eval(c, eval->remaining());
    if (*enumerate) return cmd_enumerate();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const abya::io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
