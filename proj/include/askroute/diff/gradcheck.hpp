#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "askroute/diff/params.hpp"

namespace askroute::diff {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

class NonFiniteValue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
using ScalarFn = std::function<Var<T>(Tape<T>&, const BoundTensors<T>&)>;

/// Compares the tape gradient of `f` against five-point central differences
/// of step `h` on every coordinate of `params`. The error of one coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
template <typename T>
GradCheckResult check_gradients(const ScalarFn<T>& f, NamedTensors<T> params, double h, double floor = 1e-6) {
  auto evaluate = [&](const NamedTensors<T>& p) {
    Tape<T> tape;
    BoundTensors<T> bound(tape, p);
    const double v = static_cast<double>(f(tape, bound).item());
    if (!std::isfinite(v)) throw NonFiniteValue("check_gradients: function value is not finite");
    return v;
  };

  NamedTensors<T> analytic = params.zeros_like();
  {
    Tape<T> tape;
    BoundTensors<T> bound(tape, params);
    auto out = f(tape, bound);
    if (!std::isfinite(static_cast<double>(out.item()))) throw NonFiniteValue("check_gradients: function value is not finite");
    tape.backward(out);
    bound.accumulate_grads(analytic);
  }

  GradCheckResult result;
  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& [name, tensor] = params.entries()[e];
    auto values = tensor.values();
    const auto grad = analytic.entries()[e].second.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const T saved = values[k];
      auto at = [&](double offset) {
        values[k] = static_cast<T>(static_cast<double>(saved) + offset);
        return evaluate(params);
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      values[k] = saved;
      const double a = static_cast<double>(grad[k]);
      if (!std::isfinite(a)) throw NonFiniteValue("check_gradients: non-finite analytic gradient in '" + name + "'");
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        if (err >= result.max_relative_error) {
          result.worst_tensor = name;
          result.worst_index = k;
          result.analytic = a;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace askroute::diff
