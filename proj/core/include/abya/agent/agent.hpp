#pragma once

// Observation encoder, memory, question policy (language model), action
// policy with value head, and the FiLM-conditioned encoder variant.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "abya/autodiff/ops.hpp"
#include "abya/autodiff/param_set.hpp"
#include "abya/autodiff/sampling.hpp"
#include "abya/gridworld/world.hpp"
#include "abya/oracle/oracle.hpp"

namespace abya::agent {

using ad::Var;

enum class ModelKind : std::uint8_t { Main, Film, Baseline };

std::string_view model_name(ModelKind kind);
ModelKind model_from_name(std::string_view name);

inline bool asks_questions(ModelKind kind) { return kind != ModelKind::Baseline; }

struct Dims {
  std::size_t obs_embedding = 64;
  std::size_t word_embedding = 32;
  std::size_t lm_hidden = 128;
  std::size_t memory = 128;
  std::size_t trunk = 128;
  std::size_t code_embedding = 8;  // per observation channel
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  std::size_t film_blocks = 5;
  std::size_t token_cap = 8;

  std::size_t conv_features() const {
    const std::size_t side = grid::kViewSize - 4;  // two valid 3x3 convolutions
    return conv2_channels * side * side;
  }
  std::size_t memory_input() const { return obs_embedding + word_embedding + 2 + grid::kActionCount; }
  std::size_t lm_context() const { return obs_embedding + memory; }
  std::size_t qa_encoding() const { return word_embedding + 2 + lm_hidden; }
  std::size_t policy_input(ModelKind kind) const {
    if (kind == ModelKind::Main) return obs_embedding + word_embedding + 2 + lm_hidden + memory;
    return obs_embedding + memory;
  }
  /// The LM never predicts <sos>; output row k scores token k + 1.
  std::size_t lm_outputs() const { return oracle::vocab::kSize - 1; }
};

/// Name of the frozen word-embedding table.
inline constexpr std::string_view kWordEmbedding = "theta.word_embedding";

namespace detail {

template <typename T>
ad::Tensor<T> uniform(ad::Shape dims, double bound, Rng& rng) {
  ad::Tensor<T> t(std::move(dims));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
ad::Tensor<T> normal(ad::Shape dims, double stddev, Rng& rng) {
  ad::Tensor<T> t(std::move(dims));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

/// Fan-in scaled uniform weights and bias; `gain` shrinks both.
template <typename T>
void add_linear(ad::ParamSet<T>& ps, const std::string& prefix, ad::Group group, std::size_t out,
                std::size_t in, Rng& rng, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(in));
  ps.add(prefix + ".w", group, uniform<T>({out, in}, bound, rng));
  ps.add(prefix + ".b", group, uniform<T>({out}, bound, rng));
}

template <typename T>
void add_conv(ad::ParamSet<T>& ps, const std::string& prefix, std::size_t out, std::size_t in,
              Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * 9));
  ps.add(prefix + ".w", ad::Group::Encoder, uniform<T>({out, in, 3, 3}, bound, rng));
  ps.add(prefix + ".b", ad::Group::Encoder, uniform<T>({out}, bound, rng));
}

}  // namespace detail

/// Creates the parameters of a model kind; the initial values depend only on
/// `seed`. Parameters shared between kinds draw from the same stream
/// positions, so a Baseline and a Main model built from one seed agree on
/// the encoder and memory.
template <typename T>
ad::ParamSet<T> make_params(ModelKind kind, std::uint64_t seed, const Dims& d = {}) {
  using ad::Group;
  ad::ParamSet<T> ps;
  Rng enc_rng(seed ^ 0x0e1c0de5ULL);
  ps.add("nu.embed.kind", Group::Encoder, detail::normal<T>({grid::kKindCodes, d.code_embedding}, 1.0, enc_rng));
  ps.add("nu.embed.color", Group::Encoder, detail::normal<T>({grid::kColorCodes, d.code_embedding}, 1.0, enc_rng));
  ps.add("nu.embed.state", Group::Encoder, detail::normal<T>({grid::kStateCodes, d.code_embedding}, 1.0, enc_rng));
  detail::add_conv(ps, "nu.conv1", d.conv1_channels, 3 * d.code_embedding, enc_rng);
  detail::add_conv(ps, "nu.conv2", d.conv2_channels, d.conv1_channels, enc_rng);
  detail::add_linear(ps, "nu.fc", Group::Encoder, d.obs_embedding, d.conv_features(), enc_rng);

  Rng mem_rng(seed ^ 0x3e3021ULL);
  const double mem_bound = 1.0 / std::sqrt(static_cast<double>(d.memory));
  ps.add("mu.lstm.w", Group::Memory,
         detail::uniform<T>({4 * d.memory, d.memory_input() + d.memory}, mem_bound, mem_rng));
  ps.add("mu.lstm.b", Group::Memory, detail::uniform<T>({4 * d.memory}, mem_bound, mem_rng));

  if (asks_questions(kind)) {
    Rng lm_rng(seed ^ 0x1a96ULL);
    ps.add(std::string(kWordEmbedding), Group::Question,
           detail::normal<T>({oracle::vocab::kSize, d.word_embedding}, 1.0, lm_rng));
    // Small context projection: a pretrained LM starts out nearly unconditioned.
    detail::add_linear(ps, "theta.init", Group::Question, d.lm_hidden, d.lm_context(), lm_rng, 0.1);
    const double lm_bound = 1.0 / std::sqrt(static_cast<double>(d.lm_hidden));
    ps.add("theta.lstm.w", Group::Question,
           detail::uniform<T>({4 * d.lm_hidden, d.word_embedding + d.lm_hidden}, lm_bound, lm_rng));
    ps.add("theta.lstm.b", Group::Question, detail::uniform<T>({4 * d.lm_hidden}, lm_bound, lm_rng));
    detail::add_linear(ps, "theta.out", Group::Question, d.lm_outputs(), d.lm_hidden, lm_rng);
  }

  if (kind == ModelKind::Film) {
    Rng film_rng(seed ^ 0xf11aULL);
    detail::add_linear(ps, "nu.film.gen", Group::Encoder, d.film_blocks * 2 * d.conv2_channels,
                       d.qa_encoding(), film_rng, 0.1);
    for (std::size_t k = 0; k < d.film_blocks; ++k) {
      detail::add_conv(ps, "nu.film.block" + std::to_string(k), d.conv2_channels, d.conv2_channels,
                       film_rng);
    }
    detail::add_linear(ps, "nu.film.fc", Group::Encoder, d.obs_embedding, d.conv_features(), film_rng);
  }

  Rng pol_rng(seed ^ 0x9011c7ULL);
  detail::add_linear(ps, "phi.trunk1", Group::Policy, d.trunk, d.policy_input(kind), pol_rng);
  detail::add_linear(ps, "phi.trunk2", Group::Policy, d.trunk, d.trunk, pol_rng);
  detail::add_linear(ps, "phi.policy", Group::Policy, grid::kActionCount, d.trunk, pol_rng, 0.01);
  detail::add_linear(ps, "phi.value", Group::Policy, 1, d.trunk, pol_rng);
  return ps;
}

/// Recurrent memory and the previous step's inputs to it.
template <typename T>
struct AgentState {
  Var hidden;
  Var cell;
  Var last_obs;       // e^o of the previous step
  Var last_question;  // e^q
  Var last_answer;    // eta as floats
  std::optional<int> last_action;
};

template <typename T>
struct ObsEncoding {
  Var features;   // conv stem output {C, H, W}
  Var embedding;  // e^o
};

template <typename T>
struct QuestionRollout {
  oracle::Tokens tokens;               // question without markers
  std::vector<oracle::TokenId> drawn;  // every sampled token, <eos> included
  std::vector<Var> token_log_probs;
  std::vector<Var> token_entropies;
  Var log_prob;      // sum over drawn tokens
  Var entropy;       // mean over drawn tokens
  Var final_hidden;  // h^q
  Var embedding;     // e^q

  T log_prob_value(const ad::Tape<T>& tape) const { return tape.value(log_prob)[0]; }
};

template <typename T>
struct ActionHead {
  Var logits;
  Var log_probs;
  Var value;
  Var entropy;
  std::vector<T> probs;
};

/// Builds the agent's computations on a tape for one set of bound parameters.
template <typename T>
class Forward {
 public:
  Forward(ad::Tape<T>& tape, const ad::BoundParams<T>& params, ModelKind kind, Dims dims = {})
      : tape_(tape), params_(params), kind_(kind), dims_(dims) {}

  ModelKind kind() const { return kind_; }
  const Dims& dims() const { return dims_; }
  ad::Tape<T>& tape() { return tape_; }

  /// Memory hidden ~ N(0, I), zero cell, zeroed previous-step slots.
  AgentState<T> init_episode(Rng& rng) {
    AgentState<T> s;
    s.hidden = tape_.constant(detail::normal<T>({dims_.memory}, 1.0, rng), "memory_init");
    s.cell = tape_.constant(ad::Tensor<T>({dims_.memory}), "memory_cell_init");
    s.last_obs = tape_.constant(ad::Tensor<T>({dims_.obs_embedding}));
    s.last_question = zero_question();
    s.last_answer = tape_.constant(ad::Tensor<T>({2}));
    return s;
  }

  ObsEncoding<T> encode_observation(const grid::Observation& obs) {
    constexpr std::size_t kCells = grid::kViewSize * grid::kViewSize;
    std::array<std::vector<std::size_t>, 3> ids;
    for (auto& v : ids) v.reserve(kCells);
    for (int r = 0; r < grid::kViewSize; ++r)
      for (int c = 0; c < grid::kViewSize; ++c)
        for (int ch = 0; ch < 3; ++ch) ids[static_cast<std::size_t>(ch)].push_back(obs.code(r, c, ch));
    const std::array<const char*, 3> tables = {"nu.embed.kind", "nu.embed.color", "nu.embed.state"};
    std::vector<Var> planes;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      Var rows = ad::gather_rows(tape_, p(tables[ch]), ids[ch]);  // {49, E}
      Var chw = ad::transpose(tape_, rows);                        // {E, 49}
      planes.push_back(ad::reshape(
          tape_, chw,
          ad::Shape{dims_.code_embedding, std::size_t{grid::kViewSize}, std::size_t{grid::kViewSize}}));
    }
    Var x = ad::concat(tape_, planes);
    x = ad::relu(tape_, ad::conv2d(tape_, x, p("nu.conv1.w"), p("nu.conv1.b")));
    x = ad::relu(tape_, ad::conv2d(tape_, x, p("nu.conv2.w"), p("nu.conv2.b")));
    Var flat = ad::reshape(tape_, x, ad::Shape{dims_.conv_features()});
    return {x, ad::linear(tape_, flat, p("nu.fc.w"), p("nu.fc.b"))};
  }

  /// One LSTM pass on [e^o, e^q, eta, one-hot(a)] of the previous step.
  AgentState<T> memory_update(const AgentState<T>& s) {
    if (!s.last_action) return s;
    ad::Tensor<T> onehot({std::size_t{grid::kActionCount}});
    onehot[static_cast<std::size_t>(*s.last_action)] = T{1};
    Var input = ad::concat(tape_, {s.last_obs, s.last_question, s.last_answer, tape_.constant(onehot)});
    if (tape_.value(input).size() != dims_.memory_input()) {
      throw ad::DimensionError("memory input", tape_.dims(input), ad::Shape{dims_.memory_input()});
    }
    auto out = ad::lstm_cell(tape_, input, s.hidden, s.cell, p("mu.lstm.w"), p("mu.lstm.b"));
    AgentState<T> next = s;
    next.hidden = out.hidden;
    next.cell = out.cell;
    next.last_action.reset();
    return next;
  }

  /// Stores this step's inputs for the next memory update.
  void remember(AgentState<T>& s, Var e_obs, Var e_q, Var eta, int action) {
    s.last_obs = e_obs;
    s.last_question = e_q;
    s.last_answer = eta;
    s.last_action = action;
  }

  /// Samples a question token by token. With `forced` set, scores that token
  /// sequence (which must include the final <eos> unless the cap was hit)
  /// instead of sampling.
  QuestionRollout<T> ask(Var e_obs, Var h_mem, Rng* rng,
                         const std::vector<oracle::TokenId>* forced = nullptr) {
    if (!asks_questions(kind_)) throw std::logic_error("ask: model kind has no question policy");
    Var context = ad::concat(tape_, {e_obs, h_mem});
    Var h = ad::tanh(tape_, ad::linear(tape_, context, p("theta.init.w"), p("theta.init.b")));
    return decode(h, rng, forced);
  }

  /// Decoding from an explicit initial LM hidden state; used by pretraining.
  QuestionRollout<T> decode(Var h, Rng* rng, const std::vector<oracle::TokenId>* forced) {
    QuestionRollout<T> q;
    Var c = tape_.constant(ad::Tensor<T>({dims_.lm_hidden}));
    oracle::TokenId previous = oracle::vocab::kSos;
    const std::size_t limit = forced ? forced->size() : dims_.token_cap;
    for (std::size_t i = 0; i < limit; ++i) {
      Var x = ad::embedding(tape_, p(std::string(kWordEmbedding)), previous);
      auto out = ad::lstm_cell(tape_, x, h, c, p("theta.lstm.w"), p("theta.lstm.b"));
      h = out.hidden;
      c = out.cell;
      Var logits = ad::linear(tape_, h, p("theta.out.w"), p("theta.out.b"));
      Var logp = ad::log_softmax(tape_, logits);
      std::size_t index = 0;
      if (forced) {
        if ((*forced)[i] == oracle::vocab::kSos || (*forced)[i] >= oracle::vocab::kSize) {
          throw std::invalid_argument("forced token out of range");
        }
        index = (*forced)[i] - 1u;
      } else {
        const auto& lp = tape_.value(logp);
        std::vector<T> probs(lp.size());
        for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(lp[k]);
        renormalize(probs);
        index = sample_categorical<T>(probs, *rng).index;
      }
      const auto token = static_cast<oracle::TokenId>(index + 1);
      q.drawn.push_back(token);
      q.token_log_probs.push_back(ad::pick(tape_, logp, index));
      q.token_entropies.push_back(ad::entropy(tape_, logits));
      if (token == oracle::vocab::kEos) break;
      q.tokens.push_back(token);
      previous = token;
    }
    q.final_hidden = h;
    q.log_prob = q.token_log_probs.size() == 1 ? q.token_log_probs[0]
                                                : ad::add_n(tape_, q.token_log_probs);
    q.entropy = ad::scale(tape_, ad::add_n(tape_, q.token_entropies),
                          T{1} / static_cast<T>(q.token_entropies.size()));
    q.embedding = embed_question(q.tokens);
    return q;
  }

  /// Mean of the question's word embeddings; zero for an empty question.
  Var embed_question(const oracle::Tokens& tokens) {
    if (tokens.empty()) return zero_question();
    std::vector<std::size_t> ids(tokens.begin(), tokens.end());
    Var rows = ad::gather_rows(tape_, p(std::string(kWordEmbedding)), ids);
    Var total = ad::sum_rows(tape_, rows);
    return ad::scale(tape_, total, T{1} / static_cast<T>(tokens.size()));
  }

  Var zero_question() { return tape_.constant(ad::Tensor<T>({dims_.word_embedding})); }

  Var answer_vector(const std::array<int, 2>& eta) {
    return tape_.constant(ad::Tensor<T>({2}, {static_cast<T>(eta[0]), static_cast<T>(eta[1])}), "eta");
  }

  /// [e^q, eta, h^q] fed to the FiLM generator.
  Var qa_encoding(Var e_q, Var eta, Var h_q) { return ad::concat(tape_, {e_q, eta, h_q}); }

  /// Residual stack over the conv stem, each block modulated per channel by
  /// (gamma, beta) generated from the question-answer encoding.
  Var film_condition(Var features, Var qa) {
    if (kind_ != ModelKind::Film) throw std::logic_error("film_condition: model kind is not FiLM");
    if (tape_.value(qa).size() != dims_.qa_encoding()) {
      throw ad::DimensionError("film qa encoding", tape_.dims(qa), ad::Shape{dims_.qa_encoding()});
    }
    const std::size_t ch = dims_.conv2_channels;
    Var film = ad::linear(tape_, qa, p("nu.film.gen.w"), p("nu.film.gen.b"));
    Var x = features;
    for (std::size_t k = 0; k < dims_.film_blocks; ++k) {
      Var gamma = ad::add_scalar(tape_, ad::slice(tape_, film, 2 * k * ch, (2 * k + 1) * ch), T{1});
      Var beta = ad::slice(tape_, film, (2 * k + 1) * ch, (2 * k + 2) * ch);
      x = residual_block(x, k, gamma, beta);
    }
    Var flat = ad::reshape(tape_, x, ad::Shape{dims_.conv_features()});
    return ad::linear(tape_, flat, p("nu.film.fc.w"), p("nu.film.fc.b"));
  }

  /// x + relu(gamma * conv(x) + beta).
  Var residual_block(Var x, std::size_t k, Var gamma, Var beta) {
    const std::string prefix = "nu.film.block" + std::to_string(k);
    Var y = ad::conv2d(tape_, x, p(prefix + ".w"), p(prefix + ".b"), 1, 1);
    y = ad::relu(tape_, ad::channel_affine(tape_, y, gamma, beta));
    return ad::add(tape_, x, y);
  }

  /// Action distribution and value. Main consumes [e^o, e^q, eta, h^q, h^m];
  /// Baseline and FiLM consume [e^o, h^m] (FiLM passes its conditioned e^o).
  ActionHead<T> act(Var e_obs, Var h_mem, std::optional<Var> e_q = std::nullopt,
                    std::optional<Var> eta = std::nullopt, std::optional<Var> h_q = std::nullopt) {
    Var input;
    if (kind_ == ModelKind::Main) {
      if (!e_q || !eta || !h_q) throw std::invalid_argument("act: Main needs e^q, eta and h^q");
      input = ad::concat(tape_, {e_obs, *e_q, *eta, *h_q, h_mem});
    } else {
      input = ad::concat(tape_, {e_obs, h_mem});
    }
    if (tape_.value(input).size() != dims_.policy_input(kind_)) {
      throw ad::DimensionError("policy input", tape_.dims(input), ad::Shape{dims_.policy_input(kind_)});
    }
    Var h1 = ad::tanh(tape_, ad::linear(tape_, input, p("phi.trunk1.w"), p("phi.trunk1.b")));
    Var h2 = ad::tanh(tape_, ad::linear(tape_, h1, p("phi.trunk2.w"), p("phi.trunk2.b")));
    ActionHead<T> head;
    head.logits = ad::linear(tape_, h2, p("phi.policy.w"), p("phi.policy.b"));
    head.log_probs = ad::log_softmax(tape_, head.logits);
    head.value = ad::linear(tape_, h2, p("phi.value.w"), p("phi.value.b"));
    head.entropy = ad::entropy(tape_, head.logits);
    const auto& lp = tape_.value(head.log_probs);
    head.probs.resize(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) head.probs[k] = std::exp(lp[k]);
    renormalize(head.probs);
    return head;
  }

 private:
  Var p(const std::string& name) const { return params_[name]; }

  static void renormalize(std::vector<T>& probs) {
    double total = 0.0;
    for (T v : probs) total += static_cast<double>(v);
    for (T& v : probs) v = static_cast<T>(static_cast<double>(v) / total);
  }

  ad::Tape<T>& tape_;
  const ad::BoundParams<T>& params_;
  ModelKind kind_;
  Dims dims_;
};

}  // namespace abya::agent
