#pragma once

#include <cstdint>
#include <vector>

#include "askroute/rng.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::oracle {

struct OracleConfig {
  double noise_c = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const OracleConfig& c);
void from_json(const nlohmann::json& j, OracleConfig& c);
void validate(const OracleConfig& c);

struct OracleAnswer {
  std::size_t action_index = 0;
  bool was_distorted = false;
  std::size_t truth_index = 0;
  friend bool operator==(const OracleAnswer&, const OracleAnswer&) = default;
};

void to_json(nlohmann::json& j, const OracleAnswer& a);
void from_json(const nlohmann::json& j, OracleAnswer& a);

/// Stop when at the target, otherwise the move onto the shortest path.
std::size_t teacher_action(const world::WorldGraph& world, int current, int target, const world::ActionSet& actions);

/// Probability of each action index being returned by a distorted answer whose
/// truth is `truth`. Moves other than the truth get weight
/// exp(-|wrap(θ_truth - θ_i)| / temperature); stop gets zero. A stop truth
/// spreads uniformly over the moves. All-zero when no alternative exists.
std::vector<double> distortion_distribution(const world::ActionSet& actions, std::size_t truth, double temperature = 1.0);

/// Truth with probability 1 - noise_c, otherwise a draw from the distortion
/// distribution. Always consumes one Bernoulli draw, then one categorical draw
/// when distorting.
OracleAnswer respond(const world::WorldGraph& world, int current, int target, const world::ActionSet& actions,
                     const OracleConfig& config, Rng& rng);

/// Per-episode answer stream, independent of evaluation order.
inline Rng episode_stream(const OracleConfig& config, std::uint64_t episode_key) {
  return Rng(derive_seed(config.seed, episode_key ^ 0x0a11ce5ULL));
}

}  // namespace askroute::oracle
