#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "askroute/diff/ops.hpp"
#include "askroute/diff/optim.hpp"
#include "askroute/episode.hpp"
#include "askroute/navpolicy.hpp"
#include "askroute/oracle.hpp"
#include "askroute/rng.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::train {

inline constexpr double kSuccessRadius = 3.0;
inline constexpr double kTerminalReward = 2.0;

enum class DevMode { next, paper };

struct TrainConfig {
  double gamma = 0.9;
  double il_weight = 1.0;
  double rl_weight = 0.3;
  double critic_weight = 1.0;
  double entropy_coeff = 0.01;
  double r_ask = 0.3;
  bool dev_enabled = true;
  DevMode dev_mode = DevMode::next;
  bool ask_enabled = false;
  /// Policy-gradient term for the move executed on the oracle's behalf.
  bool forced_move_pg = true;
  /// Imitation cross-entropy over move logits only, leaving the ask logit out.
  bool il_exclude_ask = true;
  /// Critic loss stops at the critic head instead of reaching the shared trunk.
  bool detach_critic = true;
  int max_steps = 20;
  int batch_size = 8;
  int iterations = 3000;
  int log_interval = 50;
  int val_episodes = 100;
  double divergence_threshold = 1e3;
  diff::OptimizerConfig optimizer{.learning_rate = 3e-3};
  policy::ModelConfig model;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void validate(const TrainConfig& c);

struct RewardRecord {
  int from = 0;
  int to = 0;
  std::size_t action = 0;
  bool is_ask = false;
  bool forced = false;  // move executed because the oracle answered
  double dis = 0.0;
  double dev = 0.0;
  double ask_penalty = 0.0;
  double terminal = 0.0;
  double g = 0.0;
  double value = 0.0;
};

void to_json(nlohmann::json& j, const RewardRecord& r);

/// d(v_t, v_n) - d(v_{t+1}, v_n).
double distance_shaping(const world::WorldGraph& world, int v_t, int v_next, int v_n);

/// Minus the distance from v_{t+1} to the ground-truth viewpoint nearest to
/// v_{t+1} (`next`) or to v_t (`paper`).
double deviation_shaping(const world::WorldGraph& world, int v_t, int v_next, std::span<const int> gt,
                         DevMode mode = DevMode::next);

/// Fills `g` with G_t = terminal_t + γ·G_{t+1}.
void compute_returns(std::vector<RewardRecord>& records, double gamma);

/// DEV_t + DIS_t + ask_penalty_t + G_t per record (returns must be filled).
std::vector<double> critic_targets(const std::vector<RewardRecord>& records);

/// Returns filled in, then critic targets.
std::vector<double> returns_and_targets(std::vector<RewardRecord>& records, double gamma);

bool is_success(const world::WorldGraph& world, int final_viewpoint, int target);

/// Replays a recorded rollout instead of sampling; advantages may also be
/// pinned so the surrogate objective is a fixed function of the parameters.
struct RolloutControl {
  const std::vector<std::size_t>* actions = nullptr;
  const std::vector<double>* advantages = nullptr;
};

template <typename T>
struct EpisodeLoss {
  diff::Var<T> total;
  double il = 0.0;
  double rl = 0.0;      // policy-gradient part, mean per record
  double critic = 0.0;  // mean squared critic error
  double entropy = 0.0;  // mean per decision
  std::vector<RewardRecord> records;
  std::vector<std::size_t> sampled;  // agent decisions, for replay
  std::vector<double> advantages;
  int asks = 0;
  int moves = 0;
  bool success = false;
};

/// Teacher-forced cross-entropy along `trajectory`, averaged per step: the
/// label at each node is the move onto the next node, then stop at the end.
template <typename T>
diff::Var<T> imitation_loss(policy::Policy<T>& net, const policy::EncodedInstruction<T>& enc, const world::WorldGraph& w,
                            std::span<const int> trajectory, bool exclude_ask) {
  auto& tape = net.tape();
  auto state = net.initial_state();
  double heading = 0.0;
  std::vector<diff::Var<T>> terms;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const int at = trajectory[i];
    const auto view = world::view_features(w, at, heading);
    const auto actions = world::navigable_actions(w, at, heading);
    const auto out = net.step(enc, view, actions, state);
    std::size_t label = actions.stop_index();
    if (i + 1 < trajectory.size()) {
      label = actions.index_of(trajectory[i + 1]);
      if (label == world::ActionSet::npos) throw std::invalid_argument("imitation_loss: trajectory is not a walk");
    }
    auto logits = out.logits;
    if (exclude_ask && net.config().ask_enabled) logits = diff::slice(logits, 0, actions.size());
    terms.push_back(diff::cross_entropy(logits, label));
    state = net.advance(out.state, actions, label);
    if (i + 1 < trajectory.size()) heading = world::bearing(w, at, trajectory[i + 1]);
  }
  if (terms.empty()) return tape.scalar(T{0});
  return diff::scale(diff::add_n(terms), static_cast<T>(1.0 / static_cast<double>(terms.size())));
}

/// One training episode: the imitation branch along `episode.path` and the
/// sampled A2C branch toward `episode.target`. The oracle answering sampled
/// asks is noise-free.
template <typename T>
EpisodeLoss<T> episode_loss(policy::Policy<T>& net, const world::WorldGraph& w, const data::Episode& episode,
                            const TrainConfig& config, Rng& rng, RolloutControl control = {}) {
  auto& tape = net.tape();
  EpisodeLoss<T> result;
  const auto enc = net.encode(episode.instruction.token_ids);
  diff::Var<T> total = tape.scalar(T{0});

  if (config.il_weight != 0.0) {
    auto il = imitation_loss(net, enc, w, episode.path, config.il_exclude_ask);
    result.il = static_cast<double>(il.item());
    total = diff::add(total, diff::scale(il, static_cast<T>(config.il_weight)));
  }
  if (config.rl_weight == 0.0) {
    result.total = total;
    return result;
  }

  struct Decision {
    diff::Var<T> logp;
    diff::Var<T> value;
  };
  std::vector<Decision> decisions;  // aligned with records
  std::vector<diff::Var<T>> entropies;
  auto state = net.initial_state();
  int at = episode.start;
  double heading = 0.0;
  bool stopped = false;
  std::size_t replay = 0;
  const std::span<const int> gt(episode.path);

  auto transition = [&](RewardRecord& r, int next) {
    r.to = next;
    r.dis = distance_shaping(w, r.from, next, episode.target);
    r.dev = config.dev_enabled ? deviation_shaping(w, r.from, next, gt, config.dev_mode) : 0.0;
  };

  for (int t = 0; t < config.max_steps && !stopped; ++t) {
    const auto view = world::view_features(w, at, heading);
    const auto actions = world::navigable_actions(w, at, heading);
    const auto out = net.step(enc, view, actions, state);
    const auto logp = diff::log_softmax(out.logits);
    entropies.push_back(diff::entropy(out.logits));
    const double value = static_cast<double>(out.value.item());

    std::size_t choice;
    if (control.actions) {
      if (replay >= control.actions->size()) throw std::invalid_argument("episode_loss: replay ran out of actions");
      choice = (*control.actions)[replay++];
    } else {
      const auto p = out.probs.value();
      choice = rng.categorical(p);
    }
    result.sampled.push_back(choice);

    std::size_t executed = choice;
    if (net.config().ask_enabled && choice == actions.size()) {
      RewardRecord ask;
      ask.from = at;
      ask.action = choice;
      ask.is_ask = true;
      ask.ask_penalty = -config.r_ask;
      ask.value = value;
      transition(ask, at);
      result.records.push_back(ask);
      decisions.push_back({diff::pick(logp, choice), out.value});
      ++result.asks;

      executed = oracle::teacher_action(w, at, episode.target, actions);
      RewardRecord forced;
      forced.from = at;
      forced.action = executed;
      forced.forced = true;
      forced.value = value;
      transition(forced, actions.is_stop(executed) ? at : actions.moves[executed].destination);
      result.records.push_back(forced);
      decisions.push_back({config.forced_move_pg ? diff::pick(logp, executed) : diff::Var<T>{}, out.value});
    } else {
      RewardRecord move;
      move.from = at;
      move.action = choice;
      move.value = value;
      transition(move, actions.is_stop(choice) ? at : actions.moves[choice].destination);
      result.records.push_back(move);
      decisions.push_back({diff::pick(logp, choice), out.value});
    }
    ++result.moves;
    state = net.advance(out.state, actions, executed);
    if (actions.is_stop(executed)) {
      stopped = true;
    } else {
      const int next = actions.moves[executed].destination;
      heading = world::bearing(w, at, next);
      at = next;
    }
  }

  result.success = is_success(w, at, episode.target);
  result.records.back().terminal = result.success ? kTerminalReward : -kTerminalReward;
  const auto targets = returns_and_targets(result.records, config.gamma);

  std::vector<diff::Var<T>> pg_terms, critic_terms;
  result.advantages.resize(result.records.size());
  for (std::size_t k = 0; k < result.records.size(); ++k) {
    const double adv = control.advantages ? control.advantages->at(k) : targets[k] - result.records[k].value;
    result.advantages[k] = adv;
    if (decisions[k].logp.tape) pg_terms.push_back(diff::scale(decisions[k].logp, static_cast<T>(-adv)));
    auto err = diff::sub(decisions[k].value, tape.constant(diff::Shape{1}, {static_cast<T>(targets[k])}));
    critic_terms.push_back(diff::sum(diff::multiply(err, err)));
  }
  const auto per_record = static_cast<T>(1.0 / static_cast<double>(result.records.size()));
  const auto per_decision = static_cast<T>(1.0 / static_cast<double>(entropies.size()));
  auto pg = pg_terms.empty() ? tape.scalar(T{0}) : diff::scale(diff::add_n(pg_terms), per_record);
  auto critic = diff::scale(diff::add_n(critic_terms), per_record);
  auto ent = diff::scale(diff::add_n(entropies), per_decision);
  result.rl = static_cast<double>(pg.item());
  result.critic = static_cast<double>(critic.item());
  result.entropy = static_cast<double>(ent.item());

  auto rl = diff::add(pg, diff::scale(critic, static_cast<T>(config.critic_weight)));
  rl = diff::sub(rl, diff::scale(ent, static_cast<T>(config.entropy_coeff)));
  result.total = diff::add(total, diff::scale(rl, static_cast<T>(config.rl_weight)));
  return result;
}

struct StepStats {
  double il = 0.0;
  double rl = 0.0;
  double critic = 0.0;
  double entropy = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double asks = 0.0;
  double success = 0.0;
};

/// Optimizer, parameters and position in the run; everything needed to
/// continue bit-identically.
struct TrainerState {
  policy::ModelParams params;
  diff::Optimizer<float> optimizer;
  long iteration = 0;
};

TrainerState make_state(const TrainConfig& config, policy::ModelParams params);
void save_state(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_state(const TrainConfig& config, const std::filesystem::path& path);

/// Episodes of batch `iteration`: consecutive slices of per-epoch
/// permutations derived from the seed alone.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, long iteration, std::uint64_t seed);

/// One optimizer step over a batch. Rollouts run in parallel; gradients are
/// summed in batch order.
StepStats train_step(TrainerState& state, const TrainConfig& config, const std::vector<world::WorldGraph>& worlds,
                     const std::vector<data::Episode>& episodes);

struct TrainCallbacks {
  /// Validation at each log point: returns (success rate, mean questions).
  std::function<std::pair<double, double>(const policy::ModelParams&)> validate;
};

struct CurveRow {
  long iter = 0;
  double il = 0.0, rl = 0.0, critic = 0.0, entropy = 0.0, val_sr = 0.0, val_asks = 0.0;
};

std::string curve_header();
std::string curve_line(const CurveRow& row);

/// Runs until config.iterations, writing curve.csv, model.askc and
/// state.askc under `out_dir` (when non-empty). Resumes from `state`.
std::vector<CurveRow> train(TrainerState& state, const TrainConfig& config, const std::vector<world::WorldGraph>& worlds,
                            const std::vector<data::Episode>& episodes, const TrainCallbacks& callbacks,
                            const std::filesystem::path& out_dir = {});

}  // namespace askroute::train
