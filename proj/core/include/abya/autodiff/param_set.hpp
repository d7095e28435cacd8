#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abya/autodiff/tape.hpp"
#include "abya/autodiff/tensor.hpp"

namespace abya::ad {

/// Parameter groups of the agent: policy/value head, question policy,
/// observation encoder, memory.
enum class Group { Policy, Question, Encoder, Memory };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::Policy: return "phi";
    case Group::Question: return "theta";
    case Group::Encoder: return "nu";
    case Group::Memory: return "mu";
  }
  return "?";
}

template <typename T>
using GradientMap = std::unordered_map<std::string, Tensor<T>>;

/// Named, grouped parameter tensors in insertion order.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Group group;
    Tensor<T> value;
    bool frozen = false;  // excluded from optimizer updates
  };

  Tensor<T>& add(std::string name, Group group, Tensor<T> value, bool frozen = false) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), group, std::move(value), frozen});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Tensor<T>& at(const std::string& name) { return entries_[lookup(name)].value; }
  const Tensor<T>& at(const std::string& name) const { return entries_[lookup(name)].value; }
  const Entry& entry(const std::string& name) const { return entries_[lookup(name)]; }

  void set_frozen(const std::string& name, bool frozen) { entries_[lookup(name)].frozen = frozen; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  std::size_t scalar_count(Group g) const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.group == g) n += e.value.size();
    return n;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.group, e.value.template cast<U>(), e.frozen);
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters registered as leaves of one tape. Frozen parameters become
/// constants, so no gradient ever reaches them.
template <typename T>
class BoundParams {
 public:
  BoundParams(Tape<T>& tape, const ParamSet<T>& params) {
    for (const auto& e : params.entries()) {
      Var v = e.frozen ? tape.constant(e.value, "parameter") : tape.variable(e.value, "parameter");
      vars_.emplace(e.name, v);
      order_.emplace_back(e.name, v);
    }
  }

  Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw std::out_of_range("parameter not bound: " + name);
    return it->second;
  }

  const std::vector<std::pair<std::string, Var>>& ordered() const { return order_; }

 private:
  std::unordered_map<std::string, Var> vars_;
  std::vector<std::pair<std::string, Var>> order_;
};

/// Backpropagates from a scalar loss and collects d(loss)/d(p) for every bound
/// parameter; parameters the loss does not reach get a zero tensor.
template <typename T>
GradientMap<T> gradients(Tape<T>& tape, Var loss, const BoundParams<T>& bound) {
  tape.backward(loss);
  GradientMap<T> out;
  for (const auto& [name, v] : bound.ordered()) {
    Tensor<T> g(tape.dims(v));
    auto src = tape.grad(v);
    if (!src.empty()) std::copy(src.begin(), src.end(), g.data().begin());
    out.emplace(name, std::move(g));
  }
  return out;
}

}  // namespace abya::ad
