#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "askroute/diff/tape.hpp"

namespace askroute::diff {

/// Named tensors in a fixed insertion order. The order is the checkpoint
/// order and the order gradients are reduced in.
template <typename T>
class NamedTensors {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T>& add(std::string name, Tensor<T> tensor) {
    if (find(name)) throw std::invalid_argument("duplicate tensor name '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
  }

  Tensor<T>* find(const std::string& name) {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
    return it == entries_.end() ? nullptr : &it->second;
  }
  const Tensor<T>* find(const std::string& name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
    return it == entries_.end() ? nullptr : &it->second;
  }

  Tensor<T>& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw std::out_of_range("no tensor named '" + name + "'");
  }
  const Tensor<T>& at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw std::out_of_range("no tensor named '" + name + "'");
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  /// Same names and shapes, all zeros.
  NamedTensors zeros_like() const {
    NamedTensors out;
    for (const auto& [name, t] : entries_) out.add(name, Tensor<T>(t.shape()));
    return out;
  }

  template <typename U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  /// this += other, matching by position; names and shapes must agree.
  void accumulate(const NamedTensors& other) {
    if (other.size() != size()) throw std::invalid_argument("accumulate: tensor sets differ");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& [name, t] = entries_[i];
      const auto& [oname, ot] = other.entries_[i];
      if (name != oname || t.shape() != ot.shape()) throw std::invalid_argument("accumulate: mismatch at '" + name + "'");
      auto dst = t.values();
      auto src = ot.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

  void scale(T factor) {
    for (auto& e : entries_)
      for (T& v : e.second.values()) v *= factor;
  }

  friend bool operator==(const NamedTensors& a, const NamedTensors& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Tape leaves for every tensor of a set, so gradients can be read back by name.
template <typename T>
class BoundTensors {
 public:
  BoundTensors(Tape<T>& tape, const NamedTensors<T>& tensors) : source_(&tensors) {
    vars_.reserve(tensors.size());
    for (const auto& e : tensors.entries()) vars_.push_back(tape.param(e.second));
  }

  Var<T> operator[](const std::string& name) const {
    const auto& entries = source_->entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].first == name) return vars_[i];
    throw std::out_of_range("no bound tensor named '" + name + "'");
  }

  /// Adds the tape gradients into `grads` (same layout as the bound set).
  void accumulate_grads(NamedTensors<T>& grads) const {
    auto& dst = grads.entries();
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto g = vars_[i].tape->grad(vars_[i]);
      auto d = dst.at(i).second.values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[k];
    }
  }

 private:
  const NamedTensors<T>* source_;
  std::vector<Var<T>> vars_;
};

}  // namespace askroute::diff
