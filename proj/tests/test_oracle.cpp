#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "askroute/errors.hpp"
#include "askroute/oracle.hpp"
#include "askroute/rng.hpp"
#include "askroute/world.hpp"
#include "fixtures.hpp"

using namespace askroute;
using oracle::OracleConfig;

namespace {

constexpr double kPi = world::kPi;

// Upper 1% points of the chi-square distribution, by degrees of freedom.
double chi2_critical_1pct(std::size_t df) {
  static const double table[] = {0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812};
  return table[df];
}

double angle_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * kPi);
  return d > kPi ? 2 * kPi - d : d;
}

// Centre 0 with one neighbour per bearing.
world::WorldGraph fan_world(const std::vector<double>& bearings) {
  std::vector<fixtures::Vec3> pos{{0, 0, 0}};
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    pos.push_back({3 * std::cos(bearings[i]), 3 * std::sin(bearings[i]), 0});
    edges.emplace_back(0, static_cast<int>(i + 1));
  }
  return fixtures::make_world(pos, edges);
}

}  // namespace

TEST(TeacherAction, StopAtTarget) {
  const auto w = fixtures::line_world(3);
  const auto actions = world::navigable_actions(w, 1);
  EXPECT_EQ(oracle::teacher_action(w, 1, 1, actions), actions.stop_index());
}

TEST(TeacherAction, LineGraphStepsForward) {
  const auto w = fixtures::line_world(3);
  const auto actions = world::navigable_actions(w, 0);
  const auto i = oracle::teacher_action(w, 0, 2, actions);
  ASSERT_FALSE(actions.is_stop(i));
  EXPECT_EQ(actions.moves[i].destination, 1);
}

TEST(TeacherAction, ClosedLoopFollowsShortestPath) {
  const auto w = world::generate_world(world::WorldConfig{}, 21);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int start = static_cast<int>(rng.below(w.size()));
    const int target = static_cast<int>(rng.below(w.size()));
    const auto expected = world::shortest_path(w, start, target);
    int at = start, steps = 0;
    double heading = 0;
    for (;;) {
      const auto actions = world::navigable_actions(w, at, heading);
      const auto i = oracle::teacher_action(w, at, target, actions);
      if (actions.is_stop(i)) break;
      const int next = actions.moves[i].destination;
      heading = world::bearing(w, at, next);
      at = next;
      ASSERT_LE(++steps, static_cast<int>(w.size()));
    }
    EXPECT_EQ(at, target);
    EXPECT_EQ(steps, static_cast<int>(expected.size()) - 1);
  }
}

TEST(Respond, NoiseFreeEqualsTeacher) {
  const auto w = world::generate_world(world::WorldConfig{}, 22);
  OracleConfig c;
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const int at = static_cast<int>(rng.below(w.size()));
    const int target = static_cast<int>(rng.below(w.size()));
    const auto actions = world::navigable_actions(w, at, rng.uniform(-kPi, kPi));
    const auto a = oracle::respond(w, at, target, actions, c, rng);
    EXPECT_EQ(a.action_index, oracle::teacher_action(w, at, target, actions));
    EXPECT_EQ(a.truth_index, a.action_index);
    EXPECT_FALSE(a.was_distorted);
  }
}

// Truth east; alternatives at pi/4 and pi from it. Angles in radians give
// e^{-pi/4} / (e^{-pi/4} + e^{-pi}); temperature pi measures them in
// half-turns instead, giving e^{-1/4} / (e^{-1/4} + e^{-1}) = 0.679.
TEST(Respond, CloserAlternativeWinsAnalyticShare) {
  const auto w = fixtures::star_world();
  const auto actions = world::navigable_actions(w, 0);
  const std::size_t truth = actions.index_of(1);
  const std::size_t near = actions.index_of(2), far = actions.index_of(3);
  const struct {
    double temperature;
    double expected;
  } cases[] = {
      {1.0, std::exp(-kPi / 4) / (std::exp(-kPi / 4) + std::exp(-kPi))},
      {kPi, 0.679},
  };
  for (const auto& [temperature, expected] : cases) {
    const auto p = oracle::distortion_distribution(actions, truth, temperature);
    EXPECT_NEAR(p[near], expected, 5e-4);
    EXPECT_EQ(p[truth], 0.0);
    EXPECT_EQ(p[actions.stop_index()], 0.0);

    OracleConfig c;
    c.noise_c = 1.0;
    c.temperature = temperature;
    Rng rng(6);
    int near_count = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto a = oracle::respond(w, 0, 1, actions, c, rng);
      ASSERT_TRUE(a.was_distorted);
      ASSERT_NE(a.action_index, a.truth_index);
      ASSERT_TRUE(a.action_index == near || a.action_index == far);
      near_count += a.action_index == near;
    }
    EXPECT_NEAR(static_cast<double>(near_count) / n, expected, 0.01) << "temperature " << temperature;
  }
}

TEST(Respond, DistortionFrequency) {
  const auto w = fixtures::star_world();
  const auto actions = world::navigable_actions(w, 0);
  OracleConfig c;
  c.noise_c = 0.3;
  Rng rng(7);
  int distorted = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) distorted += oracle::respond(w, 0, 1, actions, c, rng).was_distorted;
  EXPECT_NEAR(static_cast<double>(distorted) / n, 0.30, 0.01);
}

TEST(Respond, DistortedChoicesFollowAngularSoftmax) {
  const std::vector<double> bearings{0.0, 0.5, 1.4, 2.6, -2.2, -0.9};
  const auto w = fan_world(bearings);
  const int target = 1;  // bearing 0
  const auto actions = world::navigable_actions(w, 0);
  const std::size_t truth = actions.index_of(target);

  // Independent expectation from the raw bearings.
  std::map<int, double> weight;
  double z = 0;
  for (std::size_t i = 1; i < bearings.size(); ++i) {
    weight[static_cast<int>(i + 1)] = std::exp(-angle_gap(bearings[0], bearings[i]));
    z += weight[static_cast<int>(i + 1)];
  }

  OracleConfig c;
  c.noise_c = 1.0;
  Rng rng(8);
  const int n = 100000;
  std::map<int, int> counts;
  for (int i = 0; i < n; ++i) {
    const auto a = oracle::respond(w, 0, target, actions, c, rng);
    ASSERT_NE(a.action_index, truth);
    ASSERT_FALSE(actions.is_stop(a.action_index));
    ++counts[actions.moves[a.action_index].destination];
  }
  double chi2 = 0;
  for (const auto& [dest, wgt] : weight) {
    const double expected = n * wgt / z;
    const double diff = counts[dest] - expected;
    chi2 += diff * diff / expected;
  }
  EXPECT_LT(chi2, chi2_critical_1pct(weight.size() - 1));
}

TEST(Respond, StopTruthSpreadsUniformly) {
  const auto w = fixtures::star_world();
  const auto actions = world::navigable_actions(w, 0);
  const auto p = oracle::distortion_distribution(actions, actions.stop_index());
  for (std::size_t i = 0; i < actions.moves.size(); ++i) EXPECT_NEAR(p[i], 1.0 / 3, 1e-12);
  EXPECT_EQ(p[actions.stop_index()], 0.0);
}

TEST(Respond, SingleMoveCannotBeDistorted) {
  const auto w = fixtures::line_world(3);
  const auto actions = world::navigable_actions(w, 0);
  OracleConfig c;
  c.noise_c = 1.0;
  Rng rng(9);
  const auto a = oracle::respond(w, 0, 2, actions, c, rng);
  EXPECT_FALSE(a.was_distorted);
  EXPECT_EQ(a.action_index, a.truth_index);
}

TEST(Respond, CloserAnglesNeverLessLikely) {
  const auto w = world::generate_world(world::WorldConfig{}, 23);
  for (int at = 0; at < static_cast<int>(w.size()); ++at) {
    const auto actions = world::navigable_actions(w, at, 0.3 * at);
    for (std::size_t truth = 0; truth < actions.moves.size(); ++truth) {
      const auto p = oracle::distortion_distribution(actions, truth);
      for (std::size_t i = 0; i < actions.moves.size(); ++i)
        for (std::size_t j = 0; j < actions.moves.size(); ++j) {
          if (i == truth || j == truth) continue;
          const double gi = angle_gap(actions.moves[truth].heading, actions.moves[i].heading);
          const double gj = angle_gap(actions.moves[truth].heading, actions.moves[j].heading);
          if (gi < gj) EXPECT_GE(p[i], p[j]);
        }
    }
  }
}

TEST(Respond, EpisodeStreamsAreIndependentOfOrder) {
  OracleConfig c;
  c.seed = 11;
  auto a = oracle::episode_stream(c, 3);
  auto b = oracle::episode_stream(c, 4);
  auto a2 = oracle::episode_stream(c, 3);
  const double x = a.uniform();
  EXPECT_EQ(x, a2.uniform());
  EXPECT_NE(x, b.uniform());
}

TEST(OracleConfigJson, RejectsBadValues) {
  EXPECT_THROW(nlohmann::json({{"noise_c", 1.5}}).get<OracleConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"noise", 0.1}}).get<OracleConfig>(), ConfigError);
  const auto c = nlohmann::json({{"noise_c", 0.2}, {"seed", 5}}).get<OracleConfig>();
  EXPECT_EQ(c.noise_c, 0.2);
  EXPECT_EQ(c.seed, 5u);
}
