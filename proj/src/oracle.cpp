#include "askroute/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "askroute/errors.hpp"
#include "askroute/jsonutil.hpp"

namespace askroute::oracle {

void to_json(nlohmann::json& j, const OracleConfig& c) {
  j = {{"noise_c", c.noise_c}, {"temperature", c.temperature}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, OracleConfig& c) {
  constexpr std::string_view what = "oracle config";
  reject_unknown_keys(j, {"noise_c", "temperature", "seed"}, what);
  read_optional(j, "noise_c", c.noise_c, what);
  read_optional(j, "temperature", c.temperature, what);
  read_optional(j, "seed", c.seed, what);
  validate(c);
}

void validate(const OracleConfig& c) {
  if (!(c.noise_c >= 0.0 && c.noise_c <= 1.0)) throw ConfigError("oracle: noise_c must lie in [0,1]");
  if (!(c.temperature > 0.0)) throw ConfigError("oracle: temperature must be positive");
}

void to_json(nlohmann::json& j, const OracleAnswer& a) {
  j = {{"action_index", a.action_index}, {"was_distorted", a.was_distorted}, {"truth_index", a.truth_index}};
}

void from_json(const nlohmann::json& j, OracleAnswer& a) {
  a.action_index = j.at("action_index").get<std::size_t>();
  a.was_distorted = j.at("was_distorted").get<bool>();
  a.truth_index = j.at("truth_index").get<std::size_t>();
}

std::size_t teacher_action(const world::WorldGraph& w, int current, int target, const world::ActionSet& actions) {
  if (current == target) return actions.stop_index();
  const auto path = world::shortest_path(w, current, target);
  const std::size_t index = actions.index_of(path.at(1));
  if (index == world::ActionSet::npos) {
    throw std::logic_error("teacher_action: successor " + std::to_string(path[1]) + " of " + std::to_string(current) +
                           " is not among the navigable moves");
  }
  return index;
}

std::vector<double> distortion_distribution(const world::ActionSet& actions, std::size_t truth, double temperature) {
  const std::size_t m = actions.size();
  if (truth >= m) throw std::out_of_range("distortion_distribution: truth index out of range");
  std::vector<double> p(m, 0.0);
  const std::size_t moves = actions.moves.size();
  double total = 0.0;
  if (actions.is_stop(truth)) {
    for (std::size_t i = 0; i < moves; ++i) p[i] = 1.0;
    total = static_cast<double>(moves);
  } else {
    const double theta = actions.moves[truth].heading;
    for (std::size_t i = 0; i < moves; ++i) {
      if (i == truth) continue;
      p[i] = std::exp(-std::abs(world::wrap_angle(theta - actions.moves[i].heading)) / temperature);
      total += p[i];
    }
  }
  if (total > 0.0)
    for (double& x : p) x /= total;
  return p;
}

OracleAnswer respond(const world::WorldGraph& w, int current, int target, const world::ActionSet& actions,
                     const OracleConfig& config, Rng& rng) {
  validate(config);
  OracleAnswer a;
  a.truth_index = teacher_action(w, current, target, actions);
  a.action_index = a.truth_index;
  if (!rng.bernoulli(config.noise_c)) return a;
  const auto p = distortion_distribution(actions, a.truth_index, config.temperature);
  bool any = false;
  for (double x : p) any = any || x > 0.0;
  if (!any) return a;
  a.action_index = rng.categorical(std::span<const double>(p));
  a.was_distorted = true;
  return a;
}

}  // namespace askroute::oracle
