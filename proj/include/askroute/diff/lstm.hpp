#pragma once

#include <array>
#include <string>
#include <utility>

#include "askroute/diff/ops.hpp"

namespace askroute::diff {

/// Weights of one LSTM cell: `weight` is [4H, in+H] acting on [x; h] and
/// `bias` is [4H]. Gate order along the 4H axis is input, forget, cell, output.
template <typename T>
struct LstmWeights {
  Var<T> weight;
  Var<T> bias;
};

template <typename T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

template <typename T>
LstmState<T> lstm_cell(const LstmWeights<T>& w, Var<T> input, const LstmState<T>& state) {
  const Shape& ws = w.weight.shape();
  const std::size_t hidden = state.h.shape().at(0);
  if (ws.size() != 2 || ws[0] != 4 * hidden || ws[1] != input.shape().at(0) + hidden ||
      w.bias.shape() != Shape{4 * hidden} || state.c.shape() != state.h.shape()) {
    throw ShapeError("lstm_cell: weight " + shape_string(ws) + " incompatible with input " +
                     shape_string(input.shape()) + " and hidden " + shape_string(state.h.shape()));
  }
  auto gates = add(matmul(w.weight, concat({input, state.h})), w.bias);
  const std::array<std::size_t, 4> sizes{hidden, hidden, hidden, hidden};
  auto parts = split(gates, std::span<const std::size_t>(sizes));
  auto in_gate = sigmoid(parts[0]);
  auto forget_gate = sigmoid(parts[1]);
  auto candidate = tanh(parts[2]);
  auto out_gate = sigmoid(parts[3]);
  auto c = add(multiply(forget_gate, state.c), multiply(in_gate, candidate));
  auto h = multiply(out_gate, tanh(c));
  return {h, c};
}

}  // namespace askroute::diff
