#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "askroute/diff/params.hpp"

namespace askroute::diff {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  /// First/second moment smoothing. With `adaptive` false, beta1 is plain
  /// momentum and beta2 is unused.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  /// Global-norm clipping threshold; <= 0 disables clipping.
  double clip_norm = 5.0;
  bool adaptive = true;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
double global_norm(const NamedTensors<T>& grads) {
  double acc = 0.0;
  for (const auto& e : grads.entries())
    for (T v : e.second.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

/// Adam (or momentum SGD) with global-norm clipping and L2 decay. Holds the
/// moment buffers; one instance per parameter set.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }
  const NamedTensors<T>& first_moment() const { return first_; }
  const NamedTensors<T>& second_moment() const { return second_; }

  /// Reinstates saved moment buffers, e.g. when resuming training.
  void restore(NamedTensors<T> first, NamedTensors<T> second, long steps) {
    if (first.size() != second.size()) throw std::invalid_argument("optimizer: moment buffers differ in size");
    first_ = std::move(first);
    second_ = std::move(second);
    steps_ = steps;
  }

  /// Clips `grads` in place, then updates `params`. Returns the pre-clip norm.
  double step(NamedTensors<T>& params, NamedTensors<T>& grads) {
    const double norm = global_norm(grads);
    if (!std::isfinite(norm)) throw NonFiniteGradient("optimizer: gradient norm is not finite");
    if (config_.clip_norm > 0.0 && norm > config_.clip_norm) grads.scale(static_cast<T>(config_.clip_norm / norm));

    if (first_.size() == 0) {
      first_ = params.zeros_like();
      second_ = params.zeros_like();
    }
    ++steps_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));

    auto& pe = params.entries();
    auto& ge = grads.entries();
    if (pe.size() != ge.size()) throw std::invalid_argument("optimizer: parameter/gradient sets differ");
    for (std::size_t i = 0; i < pe.size(); ++i) {
      if (pe[i].first != ge[i].first || pe[i].second.shape() != ge[i].second.shape()) {
        throw std::invalid_argument("optimizer: mismatch at '" + pe[i].first + "'");
      }
      auto p = pe[i].second.values();
      auto g = ge[i].second.values();
      auto m = first_.entries()[i].second.values();
      auto v = second_.entries()[i].second.values();
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = static_cast<double>(g[k]) + config_.weight_decay * static_cast<double>(p[k]);
        if (!std::isfinite(gk)) throw NonFiniteGradient("optimizer: non-finite gradient in '" + pe[i].first + "'");
        double update;
        if (config_.adaptive) {
          const double mk = b1 * m[k] + (1.0 - b1) * gk;
          const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
          m[k] = static_cast<T>(mk);
          v[k] = static_cast<T>(vk);
          const double mhat = c1 > 0.0 ? mk / c1 : mk;
          const double vhat = c2 > 0.0 ? vk / c2 : vk;
          update = mhat / (std::sqrt(vhat) + config_.epsilon);
        } else {
          const double mk = b1 * m[k] + gk;
          m[k] = static_cast<T>(mk);
          update = mk;
        }
        p[k] = static_cast<T>(static_cast<double>(p[k]) - config_.learning_rate * update);
      }
    }
    return norm;
  }

 private:
  OptimizerConfig config_;
  NamedTensors<T> first_;
  NamedTensors<T> second_;
  long steps_ = 0;
};

}  // namespace askroute::diff
