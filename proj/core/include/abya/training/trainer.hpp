#pragma once

// Episode collection and the single combined update per episode.

#include <cstdint>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "abya/agent/agent.hpp"
#include "abya/autodiff/adam.hpp"
#include "abya/autodiff/param_set.hpp"
#include "abya/gridworld/world.hpp"
#include "abya/mi/mutual_information.hpp"
#include "abya/oracle/oracle.hpp"
#include "abya/training/advantage.hpp"
#include "abya/training/config.hpp"
#include "abya/training/losses.hpp"

namespace abya::training {

/// Everything observed and decided at one step.
struct StepRecord {
  grid::Observation observation;
  oracle::Tokens question;
  std::vector<oracle::TokenId> drawn;  // sampled tokens including <eos>
  std::vector<double> token_log_probs;
  std::vector<double> token_entropies;
  oracle::AnswerCode answer;
  int action = 0;
  double action_log_prob = 0.0;
  double action_entropy = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

/// Transitions of one episode; emptied by every update.
struct EpisodeBuffer {
  std::vector<StepRecord> steps;
  std::vector<double> initial_memory;
  std::string initial_layout;  // ASCII render at t = 0

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  void clear() {
    steps.clear();
    initial_memory.clear();
    initial_layout.clear();
  }
  double episode_return() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.reward;
    return total;
  }
};

/// Differentiable quantities of a recorded episode.
template <typename T>
struct EpisodeGraph {
  ad::Tape<T> tape;
  std::unique_ptr<ad::BoundParams<T>> params;
  std::vector<ActionStep<T>> action_steps;
  std::vector<QuestionStep<T>> question_steps;
  std::vector<ad::Var> mutual_information;
};

template <typename T>
struct Episode {
  EpisodeBuffer buffer;
  std::unique_ptr<EpisodeGraph<T>> graph;
};

struct UpdateMetrics {
  bool applied = false;
  double loss_action = 0.0;
  std::optional<double> loss_question;
  double mutual_information = 0.0;
};

struct EpisodeMetrics {
  std::size_t episode = 0;
  double episode_return = 0.0;
  std::size_t length = 0;
  double syntax_error_rate = 0.0;
  UpdateMetrics update;
};

/// Derives an independent, reproducible engine per (run seed, episode, purpose).
inline Rng stream(std::uint64_t seed, std::uint64_t episode, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

template <typename T>
class Trainer {
 public:
  Trainer(TrainConfig cfg, ad::ParamSet<T> params, ad::AdamState<T> adam = {})
      : cfg_(std::move(cfg)), params_(std::move(params)), adam_(std::move(adam)) {
    if (params_.contains(std::string(agent::kWordEmbedding))) {
      params_.set_frozen(std::string(agent::kWordEmbedding), true);
    }
  }

  const TrainConfig& config() const { return cfg_; }
  TrainConfig& config() { return cfg_; }
  ad::ParamSet<T>& params() { return params_; }
  const ad::ParamSet<T>& params() const { return params_; }
  ad::AdamState<T>& adam() { return adam_; }
  const ad::AdamState<T>& adam() const { return adam_; }
  std::size_t questions_asked() const { return questions_asked_; }

  /// Plays one episode with the current parameters, recording the graph.
  Episode<T> collect(const grid::EnvConfig& env, std::uint64_t episode_index) {
    Rng world_rng = stream(cfg_.seed, episode_index, 1);
    Rng agent_rng = stream(cfg_.seed, episode_index, 2);
    Rng oracle_rng = stream(cfg_.seed, episode_index, 3);
    Rng mi_rng = stream(cfg_.seed, episode_index, 4);

    Episode<T> ep;
    ep.graph = std::make_unique<EpisodeGraph<T>>();
    auto& g = *ep.graph;
    g.params = std::make_unique<ad::BoundParams<T>>(g.tape, params_);
    agent::Forward<T> fwd(g.tape, *g.params, cfg_.model);

    grid::WorldState world = grid::generate(env, world_rng);
    ep.buffer.initial_layout = grid::render_ascii(world);
    auto state = fwd.init_episode(agent_rng);
    const auto& h0 = g.tape.value(state.hidden);
    ep.buffer.initial_memory.assign(h0.data().begin(), h0.data().end());

    bool done = false;
    while (!done) {
      StepRecord rec;
      rec.observation = grid::observe(world);
      build_step(fwd, g, state, rec, nullptr,
                 [&](const oracle::Tokens& q) { return oracle::answer(q, world, cfg_.oracle, oracle_rng); },
                 [&](const std::vector<T>& probs) {
                   return static_cast<int>(sample_categorical<T>(probs, agent_rng).index);
                 },
                 &agent_rng, &world, &mi_rng);
      const auto result = grid::step(world, static_cast<grid::Action>(rec.action));
      world = result.state;
      rec.reward = result.reward;
      rec.done = result.terminated;
      done = result.terminated;
      ep.buffer.steps.push_back(std::move(rec));
    }
    return ep;
  }

  /// Rebuilds the graph of a recorded episode under the current parameters,
  /// reusing its questions, answers and actions.
  std::unique_ptr<EpisodeGraph<T>> replay(const EpisodeBuffer& buffer) {
    auto graph = std::make_unique<EpisodeGraph<T>>();
    auto& g = *graph;
    g.params = std::make_unique<ad::BoundParams<T>>(g.tape, params_);
    agent::Forward<T> fwd(g.tape, *g.params, cfg_.model);
    agent::AgentState<T> state = fwd.init_episode(*scratch_rng());
    ad::Tensor<T> h0({buffer.initial_memory.size()});
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] = static_cast<T>(buffer.initial_memory[i]);
    state.hidden = g.tape.constant(std::move(h0), "memory_init");
    for (const StepRecord& recorded : buffer.steps) {
      StepRecord rec = recorded;
      build_step(fwd, g, state, rec, &recorded.drawn,
                 [&](const oracle::Tokens&) { return recorded.answer; },
                 [&](const std::vector<T>&) { return recorded.action; }, nullptr, nullptr, nullptr);
    }
    return graph;
  }

  /// One Adam step on the negated objective, then empties the buffer.
  UpdateMetrics update(Episode<T>& ep) {
    UpdateMetrics m;
    const auto& steps = ep.buffer.steps;
    if (steps.empty()) throw std::invalid_argument("update: empty episode");
    std::vector<double> rewards, values;
    for (const auto& s : steps) {
      rewards.push_back(s.reward);
      values.push_back(s.value);
    }
    const auto adv = compute_gae(rewards, values, cfg_.gamma, cfg_.lambda);
    const auto returns = discounted_returns(rewards, cfg_.gamma);

    for (std::size_t epoch = 0; epoch < std::max<std::size_t>(1, cfg_.update_epochs); ++epoch) {
      std::unique_ptr<EpisodeGraph<T>> replayed;
      EpisodeGraph<T>* g = ep.graph.get();
      if (epoch > 0 || g == nullptr) {
        replayed = replay(ep.buffer);
        g = replayed.get();
      }
      try {
        m = apply_objective(*g, adv, returns);
      } catch (const ad::NonFiniteError& e) {
        std::cerr << "update skipped: " << e.what() << '\n';
        m.applied = false;
        break;
      }
    }
    ep.graph.reset();
    ep.buffer.clear();
    return m;
  }

  /// collect + update.
  EpisodeMetrics run_episode(const grid::EnvConfig& env, std::uint64_t episode_index, bool learn,
                             const std::function<void(const EpisodeBuffer&)>& observer = {}) {
    Episode<T> ep = collect(env, episode_index);
    EpisodeMetrics out;
    out.episode = episode_index;
    out.episode_return = ep.buffer.episode_return();
    out.length = ep.buffer.size();
    std::size_t syntax_errors = 0;
    for (const auto& s : ep.buffer.steps) {
      if (agent::asks_questions(cfg_.model) && s.answer.verdict == oracle::Verdict::SyntaxError) ++syntax_errors;
    }
    out.syntax_error_rate = static_cast<double>(syntax_errors) / static_cast<double>(out.length);
    if (observer) observer(ep.buffer);
    if (learn) out.update = update(ep);
    return out;
  }

 private:
  Rng* scratch_rng() {
    scratch_ = Rng(0);
    return &scratch_;
  }

  template <typename Answer, typename Choose>
  void build_step(agent::Forward<T>& fwd, EpisodeGraph<T>& g, agent::AgentState<T>& state,
                  StepRecord& rec, const std::vector<oracle::TokenId>* forced, Answer&& answer_fn,
                  Choose&& choose, Rng* question_rng, const grid::WorldState* world, Rng* mi_rng) {
    auto& tape = g.tape;
    state = fwd.memory_update(state);
    const auto enc = fwd.encode_observation(rec.observation);
    const bool asks = agent::asks_questions(cfg_.model);
    ad::Var e_q = fwd.zero_question();
    ad::Var eta = fwd.answer_vector({0, 0});
    agent::ActionHead<T> head;
    if (asks) {
      auto q = fwd.ask(enc.embedding, state.hidden, question_rng, forced);
      ++questions_asked_;
      rec.question = q.tokens;
      rec.drawn = q.drawn;
      rec.token_log_probs.clear();
      rec.token_entropies.clear();
      for (ad::Var v : q.token_log_probs) rec.token_log_probs.push_back(tape.value(v)[0]);
      for (ad::Var v : q.token_entropies) rec.token_entropies.push_back(tape.value(v)[0]);
      rec.answer = answer_fn(q.tokens);
      eta = fwd.answer_vector(rec.answer.eta);
      e_q = q.embedding;
      if (cfg_.model == agent::ModelKind::Film) {
        ad::Var conditioned = fwd.film_condition(enc.features, fwd.qa_encoding(q.embedding, eta, q.final_hidden));
        head = fwd.act(conditioned, state.hidden);
      } else {
        head = fwd.act(enc.embedding, state.hidden, q.embedding, eta, q.final_hidden);
      }
      g.question_steps.push_back({q.log_prob, q.entropy, rec.answer.reward});
      if (cfg_.mi_enabled && mi_rng != nullptr && world != nullptr) {
        auto est = mi::estimate_agent_mi(fwd, enc, state.hidden, cfg_.mi_samples, *world, cfg_.oracle, *mi_rng);
        g.mutual_information.push_back(est.value);
      }
    } else {
      head = fwd.act(enc.embedding, state.hidden);
    }
    const int action = choose(head.probs);
    const bool fresh = forced == nullptr;
    ad::Var log_prob = ad::pick(tape, head.log_probs, static_cast<std::size_t>(action));
    if (fresh) {
      rec.action = action;
      rec.action_log_prob = static_cast<double>(tape.value(log_prob)[0]);
      rec.action_entropy = static_cast<double>(tape.value(head.entropy)[0]);
      rec.value = static_cast<double>(tape.value(head.value)[0]);
    }
    g.action_steps.push_back({log_prob, static_cast<T>(rec.action_log_prob), head.value, head.entropy});
    fwd.remember(state, enc.embedding, e_q, eta, action);
  }

  UpdateMetrics apply_objective(EpisodeGraph<T>& g, const AdvantageEstimate& adv,
                                const std::vector<double>& returns) {
    auto& tape = g.tape;
    UpdateMetrics m;
    const auto a_loss = action_loss<T>(tape, g.action_steps, adv.advantages, adv.value_targets,
                                       cfg_.action_weights());
    m.loss_action = static_cast<double>(tape.value(a_loss.total)[0]);
    ad::Var objective = a_loss.total;
    if (agent::asks_questions(cfg_.model)) {
      ad::Var q_loss = question_loss<T>(tape, g.question_steps, returns, cfg_.question_weights());
      m.loss_question = static_cast<double>(tape.value(q_loss)[0]);
      objective = ad::add(tape, objective, q_loss);
      if (cfg_.mi_enabled && !g.mutual_information.empty()) {
        ad::Var mi_mean = ad::scale(tape, ad::add_n(tape, g.mutual_information),
                                    T{1} / static_cast<T>(g.mutual_information.size()));
        m.mutual_information = static_cast<double>(tape.value(mi_mean)[0]);
        objective = mi::mi_augmented_loss(tape, objective, mi_mean, cfg_.mi_weight);
      }
    }
    ad::Var loss = ad::neg(tape, objective);
    const auto grads = ad::gradients(tape, loss, *g.params);
    ad::adam_step(params_, grads, adam_, cfg_.alpha);
    m.applied = true;
    return m;
  }

  TrainConfig cfg_;
  ad::ParamSet<T> params_;
  ad::AdamState<T> adam_;
  std::size_t questions_asked_ = 0;
  Rng scratch_;
};

}  // namespace abya::training
