#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "askroute/diff/checkpoint.hpp"
#include "askroute/diff/gradcheck.hpp"
#include "askroute/diff/lstm.hpp"
#include "askroute/diff/ops.hpp"
#include "askroute/diff/optim.hpp"
#include "askroute/diff/params.hpp"
#include "askroute/diff/tape.hpp"
#include "askroute/rng.hpp"

using namespace askroute;
using namespace askroute::diff;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor<double>(std::move(shape), std::move(v), true);
}

NamedTensors<double> params_of(std::initializer_list<std::pair<const char*, Shape>> specs, std::uint64_t seed) {
  Rng rng(seed);
  NamedTensors<double> p;
  for (const auto& [name, shape] : specs) p.add(name, random_tensor(shape, rng));
  return p;
}

double check(const ScalarFn<double>& f, const NamedTensors<double>& p) {
  return check_gradients(f, p, 1e-5).max_relative_error;
}

}  // namespace

TEST(Primitives, SoftmaxOfEqualLogitsIsUniform) {
  Tape<double> t;
  auto p = softmax(t.constant(Shape{4}, {2, 2, 2, 2}));
  for (double v : p.value()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Primitives, IdentityMatmul) {
  Tape<double> t;
  Rng rng(1);
  auto x = t.constant(random_tensor({3, 5}, rng));
  auto eye = t.constant(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto y = matmul(eye, x);
  ASSERT_EQ(y.shape(), (Shape{3, 5}));
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(y.value()[i], x.value()[i]);
}

TEST(Primitives, TanhGradientAtZeroIsOne) {
  Tape<double> t;
  auto x = t.variable(Shape{5}, std::vector<double>(5, 0.0));
  t.backward(sum(tanh(x)));
  for (double g : t.grad(x)) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Primitives, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  auto a = t.constant(Shape{2, 3}, std::vector<double>(6, 1.0));
  auto b = t.constant(Shape{2, 2}, std::vector<double>(4, 1.0));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2, 2]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(Primitives, SoftmaxRowsSumToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<double> t;
    auto x = t.constant(random_tensor({4, 7}, rng, 20.0));
    for (std::size_t axis : {0u, 1u}) {
      auto p = softmax(x, axis);
      const auto v = p.value();
      const std::size_t slices = axis == 1 ? 4 : 7, count = axis == 1 ? 7 : 4;
      for (std::size_t s = 0; s < slices; ++s) {
        double total = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
          const double e = axis == 1 ? v[s * 7 + k] : v[k * 7 + s];
          EXPECT_GE(e, 0.0);
          total += e;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
    }
  }
}

TEST(Primitives, SecondBackwardIsRejected) {
  Tape<double> t;
  auto x = t.variable(Shape{2}, {1, 2});
  auto y = sum(multiply(x, x));
  t.backward(y);
  EXPECT_THROW(t.backward(y), TapeError);
}

TEST(Primitives, BackwardLeavesForwardValuesAlone) {
  Tape<double> t;
  auto x = t.variable(Shape{3}, {0.1, -0.4, 0.7});
  auto y = softmax(tanh(x));
  const std::vector<double> before(y.value().begin(), y.value().end());
  t.backward(pick(log(y), 1));
  EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()), before);
}

// Each primitive against central differences on random shapes.
TEST(GradientProperty, EveryPrimitiveMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng shapes(seed);
    const std::size_t m = 1 + shapes.below(4), k = 1 + shapes.below(4), n = 1 + shapes.below(4);
    auto p = params_of({{"a", {m, k}}, {"b", {k, n}}, {"c", {m, n}}, {"v", {k}}, {"w", {k}}}, seed);
    const std::vector<ScalarFn<double>> cases{
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(matmul(b["a"], b["b"])); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(matmul(b["a"], b["b"]), b["c"])); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(matmul(b["a"], b["v"])); },
        [](Tape<double>&, const BoundTensors<double>& b) { return dot(b["v"], b["w"]); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(add(b["v"], b["w"]), sub(b["v"], b["w"]))); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(tanh(b["v"]), sigmoid(b["w"]))); },
        [](Tape<double>&, const BoundTensors<double>& b) { return mean(multiply(concat({b["v"], b["w"]}), concat({b["w"], b["v"]}))); },
        [](Tape<double>&, const BoundTensors<double>& b) {
          auto parts = split(concat({b["v"], b["w"]}), std::vector<std::size_t>{1, 2 * b["v"].size() - 1});
          return add(sum(multiply(parts[0], parts[0])), sum(tanh(parts[1])));
        },
        [](Tape<double>&, const BoundTensors<double>& b) { return pick(log(softmax(b["v"])), 0); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(softmax(b["c"], 0), b["c"])); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(softmax(b["c"], 1), b["c"])); },
        [](Tape<double>&, const BoundTensors<double>& b) { return pick(log_softmax(b["w"]), b["w"].size() - 1); },
        [](Tape<double>&, const BoundTensors<double>& b) { return cross_entropy(b["v"], 0); },
        [](Tape<double>&, const BoundTensors<double>& b) { return entropy(b["w"]); },
        [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(row(b["a"], 0), row(b["a"], b["a"].shape()[0] - 1))); },
        [](Tape<double>& t, const BoundTensors<double>& b) {
          const std::vector<int> ids{0, static_cast<int>(b["a"].shape()[0]) - 1, 0};
          auto e = embedding_lookup(b["a"], ids);
          return sum(multiply(e, e));
          (void)t;
        },
        [](Tape<double>&, const BoundTensors<double>& b) {
          const std::vector<Var<double>> rows{b["v"], tanh(b["w"])};
          auto s = stack(std::span<const Var<double>>(rows));
          return sum(multiply(s, s));
        },
        [](Tape<double>&, const BoundTensors<double>& b) {
          return add(scale(sum(b["v"]), 3.0), sum(multiply(b["w"], b["w"])));
        },
        [](Tape<double>&, const BoundTensors<double>& b) {
          return add_n(std::vector<Var<double>>{sum(b["v"]), dot(b["v"], b["v"]), mean(b["w"])});
        },
    };
    for (std::size_t i = 0; i < cases.size(); ++i) EXPECT_LT(check(cases[i], p), 1e-4) << "case " << i << " seed " << seed;
  }
}

TEST(GradCheck, LinearFunctionIsExact) {
  auto p = params_of({{"x", {6}}}, 3);
  ScalarFn<double> f = [](Tape<double>& t, const BoundTensors<double>& b) {
    return dot(t.constant(Shape{6}, {1, -2, 3, 0.5, 4, -1}), b["x"]);
  };
  EXPECT_LT(check(f, p), 1e-6);
}

TEST(GradCheck, SoftmaxCrossEntropyComposite) {
  auto p = params_of({{"w", {4, 3}}, {"x", {3}}}, 4);
  ScalarFn<double> f = [](Tape<double>&, const BoundTensors<double>& b) {
    return cross_entropy(matmul(b["w"], tanh(b["x"])), 2);
  };
  EXPECT_LT(check(f, p), 1e-4);
}

TEST(GradCheck, ReportsNonFiniteValues) {
  NamedTensors<double> p;
  p.add("x", Tensor<double>(Shape{1}, std::vector<double>{1e300}, true));
  ScalarFn<double> f = [](Tape<double>&, const BoundTensors<double>& b) { return sum(multiply(b["x"], b["x"])); };
  EXPECT_THROW(check_gradients(f, p, 1e-5), NonFiniteValue);
}

TEST(Primitives, LogRejectsNonPositiveInput) {
  Tape<double> t;
  EXPECT_THROW(log(t.constant(Shape{2}, {1.0, 0.0})), std::domain_error);
}

TEST(Primitives, StopGradientBlocksFlow) {
  Tape<double> t;
  auto x = t.variable(Shape{3}, {1.0, -2.0, 0.5});
  t.backward(sum(multiply(stop_gradient(x), x)));
  const auto g = t.grad(x);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], -2.0);
  EXPECT_DOUBLE_EQ(g[2], 0.5);
}

TEST(CrossEntropy, Values) {
  Tape<double> t;
  EXPECT_NEAR(cross_entropy(t.constant(Shape{4}, {0.3, 0.3, 0.3, 0.3}), 2).item(), std::log(4.0), 1e-12);
  EXPECT_NEAR(cross_entropy(t.constant(Shape{3}, {0.0, 1000.0, 0.0}), 1).item(), 0.0, 1e-12);
  EXPECT_THROW(cross_entropy(t.constant(Shape{3}, {0.0, 1.0, 2.0}), 3), std::out_of_range);

  Tape<float> tf;
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> logits(6);
    for (auto& x : logits) x = static_cast<float>(rng.uniform(-5, 5));
    const std::size_t target = rng.below(6);
    double mx = -1e300;
    for (float x : logits) mx = std::max(mx, static_cast<double>(x));
    double z = 0.0;
    for (float x : logits) z += std::exp(static_cast<double>(x) - mx);
    const double expect = -(static_cast<double>(logits[target]) - mx - std::log(z));
    EXPECT_NEAR(cross_entropy(tf.constant(Shape{6}, logits), target).item(), expect, 1e-5);
  }
}

TEST(Lstm, ZeroEverythingGivesZero) {
  Tape<double> t;
  LstmWeights<double> w{t.constant(Shape{8, 5}, std::vector<double>(40, 0.0)), t.constant(Shape{8}, std::vector<double>(8, 0.0))};
  auto s = lstm_cell(w, t.constant(Shape{3}, {0, 0, 0}), {t.constant(Shape{2}, {0, 0}), t.constant(Shape{2}, {0, 0})});
  for (double v : s.h.value()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.value()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, MatchesHandUnrolledGates) {
  // Two units, one input: gates are rows [i0 i1 f0 f1 g0 g1 o0 o1] of W·[x; h] + b.
  Rng rng(6);
  std::vector<double> W(8 * 3), bias(8);
  for (auto& v : W) v = rng.uniform(-1, 1);
  for (auto& v : bias) v = rng.uniform(-1, 1);
  const double x = 0.7, h[2] = {0.2, -0.5}, c[2] = {0.4, -0.1};
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  double pre[8];
  for (int r = 0; r < 8; ++r) pre[r] = W[r * 3] * x + W[r * 3 + 1] * h[0] + W[r * 3 + 2] * h[1] + bias[r];
  double expect_h[2], expect_c[2];
  for (int u = 0; u < 2; ++u) {
    expect_c[u] = sig(pre[2 + u]) * c[u] + sig(pre[u]) * std::tanh(pre[4 + u]);
    expect_h[u] = sig(pre[6 + u]) * std::tanh(expect_c[u]);
  }
  Tape<double> t;
  LstmWeights<double> w{t.constant(Shape{8, 3}, W), t.constant(Shape{8}, bias)};
  auto s = lstm_cell(w, t.constant(Shape{1}, {x}), {t.constant(Shape{2}, {h[0], h[1]}), t.constant(Shape{2}, {c[0], c[1]})});
  for (int u = 0; u < 2; ++u) {
    EXPECT_NEAR(s.h.value()[static_cast<std::size_t>(u)], expect_h[u], 1e-6);
    EXPECT_NEAR(s.c.value()[static_cast<std::size_t>(u)], expect_c[u], 1e-6);
  }
}

TEST(Lstm, GradientMatchesFiniteDifferences) {
  auto p = params_of({{"w", {16, 7}}, {"b", {16}}, {"x", {3}}, {"h", {4}}, {"c", {4}}}, 7);
  ScalarFn<double> f = [](Tape<double>&, const BoundTensors<double>& b) {
    auto s = lstm_cell(LstmWeights<double>{b["w"], b["b"]}, b["x"], {b["h"], b["c"]});
    auto s2 = lstm_cell(LstmWeights<double>{b["w"], b["b"]}, tanh(b["x"]), s);
    return add(sum(multiply(s2.h, s2.h)), sum(s2.c));
  };
  const auto r = check_gradients(f, p, 1e-3);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
}

TEST(Lstm, RejectsWrongShapes) {
  Tape<double> t;
  LstmWeights<double> w{t.constant(Shape{8, 4}, std::vector<double>(32, 0.0)), t.constant(Shape{8}, std::vector<double>(8, 0.0))};
  EXPECT_THROW(lstm_cell(w, t.constant(Shape{3}, {0, 0, 0}), {t.constant(Shape{2}, {0, 0}), t.constant(Shape{2}, {0, 0})}),
               ShapeError);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  NamedTensors<float> p, g;
  p.add("x", Tensor<float>(Shape{3}, {1, 2, 3}));
  g.add("x", Tensor<float>(Shape{3}, {0, 0, 0}));
  Optimizer<float> opt;
  opt.step(p, g);
  EXPECT_EQ(p.at("x"), Tensor<float>(Shape{3}, {1, 2, 3}));
}

TEST(Optimizer, PlainStep) {
  NamedTensors<double> p, g;
  p.add("x", Tensor<double>(Shape{1}, std::vector<double>{2.0}));
  g.add("x", Tensor<double>(Shape{1}, std::vector<double>{1.0}));
  OptimizerConfig c;
  c.adaptive = false;
  c.beta1 = 0.0;
  c.learning_rate = 0.1;
  Optimizer<double> opt(c);
  opt.step(p, g);
  EXPECT_NEAR(p.at("x")[0], 1.9, 1e-15);
}

TEST(Optimizer, ConvexQuadraticConverges) {
  // f(x) = Σ (x_i - t_i)², minimum 0 at t.
  const std::vector<double> target{1.0, -2.0, 0.5, 3.0};
  NamedTensors<double> p;
  p.add("x", Tensor<double>(Shape{4}, {0, 0, 0, 0}));
  auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += (p.at("x")[i] - target[i]) * (p.at("x")[i] - target[i]);
    return s;
  };
  OptimizerConfig c;
  c.adaptive = false;
  c.beta1 = 0.0;
  c.learning_rate = 0.1;
  Optimizer<double> opt(c);
  const double start = loss();
  double prev = start;
  for (int it = 0; it < 100; ++it) {
    NamedTensors<double> g;
    std::vector<double> gv(4);
    for (std::size_t i = 0; i < 4; ++i) gv[i] = 2.0 * (p.at("x")[i] - target[i]);
    g.add("x", Tensor<double>(Shape{4}, gv));
    opt.step(p, g);
    const double now = loss();
    EXPECT_LT(now, prev);
    prev = now;
  }
  EXPECT_LT(prev, 1e-3 * start);
}

TEST(Optimizer, ClipsAndRejectsNonFinite) {
  NamedTensors<double> p, g;
  p.add("x", Tensor<double>(Shape{2}, {0, 0}));
  g.add("x", Tensor<double>(Shape{2}, {30, 40}));
  OptimizerConfig c;
  c.adaptive = false;
  c.beta1 = 0.0;
  c.learning_rate = 1.0;
  c.clip_norm = 5.0;
  Optimizer<double> opt(c);
  EXPECT_DOUBLE_EQ(opt.step(p, g), 50.0);
  EXPECT_NEAR(p.at("x")[0], -3.0, 1e-12);
  EXPECT_NEAR(p.at("x")[1], -4.0, 1e-12);
  g.at("x")[0] = std::nan("");
  EXPECT_THROW(opt.step(p, g), NonFiniteGradient);
}

TEST(CheckpointFile, RoundTripIsBitIdentical) {
  Checkpoint ck;
  Rng rng(8);
  std::vector<float> v(24);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  ck.tensors.add("a", Tensor<float>(Shape{4, 6}, v));
  ck.tensors.add("b", Tensor<float>(Shape{3}, {1.5f, -0.0f, 3e-39f}));
  ck.meta = {{"k", 1}};
  const auto path = std::filesystem::temp_directory_path() / "askroute_test_ck.askc";
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.tensors, ck.tensors);
  EXPECT_EQ(back.meta, ck.meta);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_checkpoint(path), CorruptCheckpoint);
  std::filesystem::remove(path);
}
