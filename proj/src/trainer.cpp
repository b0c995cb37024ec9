#include "askroute/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "askroute/diff/checkpoint.hpp"
#include "askroute/errors.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/jsonutil.hpp"
#include "askroute/parallel.hpp"

namespace askroute::train {

namespace {

nlohmann::json optimizer_json(const diff::OptimizerConfig& o) {
  return {{"learning_rate", o.learning_rate}, {"beta1", o.beta1},           {"beta2", o.beta2},
          {"epsilon", o.epsilon},             {"weight_decay", o.weight_decay}, {"clip_norm", o.clip_norm},
          {"adaptive", o.adaptive}};
}

diff::OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
  constexpr std::string_view what = "optimizer config";
  reject_unknown_keys(j, {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "clip_norm", "adaptive"}, what);
  diff::OptimizerConfig o;
  read_optional(j, "learning_rate", o.learning_rate, what);
  read_optional(j, "beta1", o.beta1, what);
  read_optional(j, "beta2", o.beta2, what);
  read_optional(j, "epsilon", o.epsilon, what);
  read_optional(j, "weight_decay", o.weight_decay, what);
  read_optional(j, "clip_norm", o.clip_norm, what);
  read_optional(j, "adaptive", o.adaptive, what);
  return o;
}

std::string dev_mode_name(DevMode m) { return m == DevMode::next ? "next" : "paper"; }

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"gamma", c.gamma},
       {"il_weight", c.il_weight},
       {"rl_weight", c.rl_weight},
       {"critic_weight", c.critic_weight},
       {"entropy_coeff", c.entropy_coeff},
       {"r_ask", c.r_ask},
       {"dev_enabled", c.dev_enabled},
       {"dev_mode", dev_mode_name(c.dev_mode)},
       {"ask_enabled", c.ask_enabled},
       {"forced_move_pg", c.forced_move_pg},
       {"il_exclude_ask", c.il_exclude_ask},
       {"detach_critic", c.detach_critic},
       {"max_steps", c.max_steps},
       {"batch_size", c.batch_size},
       {"iterations", c.iterations},
       {"log_interval", c.log_interval},
       {"val_episodes", c.val_episodes},
       {"divergence_threshold", c.divergence_threshold},
       {"optimizer", optimizer_json(c.optimizer)},
       {"model", c.model},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  constexpr std::string_view what = "train config";
  reject_unknown_keys(j,
                      {"gamma", "il_weight", "rl_weight", "critic_weight", "entropy_coeff", "r_ask", "dev_enabled",
                       "dev_mode", "ask_enabled", "forced_move_pg", "il_exclude_ask", "detach_critic", "max_steps", "batch_size",
                       "iterations", "log_interval", "val_episodes", "divergence_threshold", "optimizer", "model", "seed"},
                      what);
  read_optional(j, "gamma", c.gamma, what);
  read_optional(j, "il_weight", c.il_weight, what);
  read_optional(j, "rl_weight", c.rl_weight, what);
  read_optional(j, "critic_weight", c.critic_weight, what);
  read_optional(j, "entropy_coeff", c.entropy_coeff, what);
  read_optional(j, "r_ask", c.r_ask, what);
  read_optional(j, "dev_enabled", c.dev_enabled, what);
  if (j.contains("dev_mode")) {
    const auto mode = j.at("dev_mode").get<std::string>();
    if (mode == "next") c.dev_mode = DevMode::next;
    else if (mode == "paper") c.dev_mode = DevMode::paper;
    else throw ConfigError("train config: dev_mode must be 'next' or 'paper'");
  }
  read_optional(j, "ask_enabled", c.ask_enabled, what);
  read_optional(j, "forced_move_pg", c.forced_move_pg, what);
  read_optional(j, "il_exclude_ask", c.il_exclude_ask, what);
  read_optional(j, "detach_critic", c.detach_critic, what);
  read_optional(j, "max_steps", c.max_steps, what);
  read_optional(j, "batch_size", c.batch_size, what);
  read_optional(j, "iterations", c.iterations, what);
  read_optional(j, "log_interval", c.log_interval, what);
  read_optional(j, "val_episodes", c.val_episodes, what);
  read_optional(j, "divergence_threshold", c.divergence_threshold, what);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
  if (j.contains("model")) c.model = j.at("model").get<policy::ModelConfig>();
  read_optional(j, "seed", c.seed, what);
  validate(c);
}

void validate(const TrainConfig& c) {
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("train: gamma must lie in (0,1]");
  if (c.r_ask < 0.0) throw ConfigError("train: r_ask must be non-negative");
  if (c.il_weight < 0.0 || c.rl_weight < 0.0 || c.entropy_coeff < 0.0 || c.critic_weight < 0.0) {
    throw ConfigError("train: loss weights must be non-negative");
  }
  if (c.max_steps < 1 || c.batch_size < 1 || c.iterations < 0 || c.log_interval < 1 || c.val_episodes < 0) {
    throw ConfigError("train: step, batch, iteration and logging counts must be positive");
  }
  if (!(c.optimizer.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
}

void to_json(nlohmann::json& j, const RewardRecord& r) {
  j = {{"from", r.from},     {"to", r.to},   {"action", r.action},           {"is_ask", r.is_ask},
       {"forced", r.forced}, {"dis", r.dis}, {"dev", r.dev},                 {"ask_penalty", r.ask_penalty},
       {"terminal", r.terminal}, {"g", r.g}, {"value", r.value}};
}

double distance_shaping(const world::WorldGraph& w, int v_t, int v_next, int v_n) {
  return world::distance(w, v_t, v_n) - world::distance(w, v_next, v_n);
}

double deviation_shaping(const world::WorldGraph& w, int v_t, int v_next, std::span<const int> gt, DevMode mode) {
  if (gt.empty()) throw std::invalid_argument("deviation_shaping: empty ground-truth trajectory");
  const int anchor = mode == DevMode::next ? v_next : v_t;
  int nearest = gt.front();
  double best = std::numeric_limits<double>::infinity();
  for (int v : gt) {
    const double d = world::distance(w, v, anchor);
    if (d < best) {
      best = d;
      nearest = v;
    }
  }
  return -world::distance(w, v_next, nearest);
}

void compute_returns(std::vector<RewardRecord>& records, double gamma) {
  double g = 0.0;
  for (std::size_t k = records.size(); k-- > 0;) {
    g = records[k].terminal + gamma * g;
    records[k].g = g;
  }
}

std::vector<double> critic_targets(const std::vector<RewardRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.dev + r.dis + r.ask_penalty + r.g);
  return out;
}

std::vector<double> returns_and_targets(std::vector<RewardRecord>& records, double gamma) {
  compute_returns(records, gamma);
  return critic_targets(records);
}

bool is_success(const world::WorldGraph& w, int final_viewpoint, int target) {
  return world::distance(w, final_viewpoint, target) < kSuccessRadius;
}

TrainerState make_state(const TrainConfig& config, policy::ModelParams params) {
  params.config.ask_enabled = config.ask_enabled;
  policy::validate(params);
  return {std::move(params), diff::Optimizer<float>(config.optimizer), 0};
}

void save_state(const TrainerState& state, const std::filesystem::path& path) {
  diff::Checkpoint ck;
  for (const auto& [name, t] : state.params.tensors.entries()) ck.tensors.add("param/" + name, t);
  for (const auto& [name, t] : state.optimizer.first_moment().entries()) ck.tensors.add("adam.m/" + name, t);
  for (const auto& [name, t] : state.optimizer.second_moment().entries()) ck.tensors.add("adam.v/" + name, t);
  ck.meta = {{"model", state.params.config},
             {"ask_enabled", state.params.config.ask_enabled},
             {"iteration", state.iteration},
             {"optimizer_steps", state.optimizer.steps()}};
  diff::save_checkpoint(ck, path);
}

TrainerState load_state(const TrainConfig& config, const std::filesystem::path& path) {
  auto ck = diff::load_checkpoint(path);
  TrainerState state{{}, diff::Optimizer<float>(config.optimizer), 0};
  diff::NamedTensors<float> first, second;
  try {
    state.params.config = ck.meta.at("model").get<policy::ModelConfig>();
    state.params.config.ask_enabled = ck.meta.at("ask_enabled").get<bool>();
    state.iteration = ck.meta.at("iteration").get<long>();
    const long steps = ck.meta.at("optimizer_steps").get<long>();
    for (auto& [name, t] : ck.tensors.entries()) {
      if (name.rfind("param/", 0) == 0) state.params.tensors.add(name.substr(6), std::move(t));
      else if (name.rfind("adam.m/", 0) == 0) first.add(name.substr(7), std::move(t));
      else if (name.rfind("adam.v/", 0) == 0) second.add(name.substr(7), std::move(t));
      else throw diff::CorruptCheckpoint("trainer state: unexpected tensor '" + name + "'");
    }
    if (first.size() != 0) state.optimizer.restore(std::move(first), std::move(second), steps);
  } catch (const nlohmann::json::exception& e) {
    throw diff::CorruptCheckpoint(std::string("trainer state: ") + e.what());
  }
  policy::validate(state.params);
  return state;
}

std::vector<std::size_t> batch_indices(std::size_t n, int batch_size, long iteration, std::uint64_t seed) {
  if (n == 0) throw DataError("train: empty training set");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  std::size_t cached_epoch = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> perm(n);
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t global = static_cast<std::size_t>(iteration) * static_cast<std::size_t>(batch_size) + static_cast<std::size_t>(b);
    const std::size_t epoch = global / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(derive_seed(seed, 0xe90c0000ULL + epoch));
      rng.shuffle(perm.begin(), perm.end());
      cached_epoch = epoch;
    }
    out.push_back(perm[global % n]);
  }
  return out;
}

StepStats train_step(TrainerState& state, const TrainConfig& config, const std::vector<world::WorldGraph>& worlds,
                     const std::vector<data::Episode>& episodes) {
  const auto idx = batch_indices(episodes.size(), config.batch_size, state.iteration, config.seed);
  const std::size_t batch = idx.size();
  std::vector<diff::NamedTensors<float>> grads(batch);
  std::vector<StepStats> stats(batch);
  const std::uint64_t step_seed = derive_seed(config.seed, 0x57e9ULL + static_cast<std::uint64_t>(state.iteration));

  parallel_for(batch, [&](std::size_t i) {
    const auto& e = episodes[idx[i]];
    const auto& w = worlds.at(static_cast<std::size_t>(e.world));
    Rng rng(derive_seed(step_seed, i));
    diff::Tape<float> tape;
    policy::Policy<float> net(tape, state.params, config.detach_critic);
    auto loss = episode_loss(net, w, e, config, rng);
    const double total = static_cast<double>(loss.total.item());
    if (!std::isfinite(total) || std::abs(total) > config.divergence_threshold) {
      nlohmann::json dump = {{"iteration", state.iteration}, {"episode", e}, {"loss", total}, {"rewards", loss.records}};
      throw DivergenceError("training diverged: " + dump.dump());
    }
    tape.backward(loss.total);
    grads[i] = state.params.tensors.zeros_like();
    net.bound().accumulate_grads(grads[i]);
    stats[i] = {loss.il, loss.rl, loss.critic, loss.entropy, total, 0.0, static_cast<double>(loss.asks),
                loss.success ? 1.0 : 0.0};
  });

  auto sum = std::move(grads[0]);
  for (std::size_t i = 1; i < batch; ++i) sum.accumulate(grads[i]);
  sum.scale(1.0f / static_cast<float>(batch));

  StepStats mean;
  for (const auto& s : stats) {
    mean.il += s.il;
    mean.rl += s.rl;
    mean.critic += s.critic;
    mean.entropy += s.entropy;
    mean.loss += s.loss;
    mean.asks += s.asks;
    mean.success += s.success;
  }
  const double inv = 1.0 / static_cast<double>(batch);
  mean.il *= inv;
  mean.rl *= inv;
  mean.critic *= inv;
  mean.entropy *= inv;
  mean.loss *= inv;
  mean.asks *= inv;
  mean.success *= inv;
  try {
    mean.grad_norm = state.optimizer.step(state.params.tensors, sum);
  } catch (const diff::NonFiniteGradient& e) {
    throw DivergenceError(std::string("training diverged at iteration ") + std::to_string(state.iteration) + ": " + e.what());
  }
  ++state.iteration;
  return mean;
}

std::string curve_header() { return "iter,il_loss,rl_loss,critic_loss,entropy,val_sr,val_asks"; }

std::string curve_line(const CurveRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.iter, r.il, r.rl, r.critic, r.entropy, r.val_sr,
                r.val_asks);
  return buf;
}

namespace {

std::vector<std::string> kept_curve_lines(const std::filesystem::path& path, long up_to) {
  std::vector<std::string> out;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stol(line.substr(0, line.find(','))) <= up_to) out.push_back(line);
  }
  return out;
}

}  // namespace

std::vector<CurveRow> train(TrainerState& state, const TrainConfig& config, const std::vector<world::WorldGraph>& worlds,
                            const std::vector<data::Episode>& episodes, const TrainCallbacks& callbacks,
                            const std::filesystem::path& out_dir) {
  validate(config);
  if (state.params.config.ask_enabled != config.ask_enabled) {
    throw ConfigError("train: model ask flag disagrees with the training config");
  }
  std::vector<std::string> lines;
  if (!out_dir.empty() && state.iteration > 0) lines = kept_curve_lines(out_dir / "curve.csv", state.iteration);

  auto flush = [&] {
    if (out_dir.empty()) return;
    std::string csv = curve_header() + "\n";
    for (const auto& l : lines) csv += l + "\n";
    io::write_file_atomic(out_dir / "curve.csv", csv);
    save_state(state, out_dir / "state.askc");
    policy::save_model(state.params, out_dir / "model.askc", {{"iteration", state.iteration}});
  };

  std::vector<CurveRow> rows;
  CurveRow acc;
  int count = 0;
  while (state.iteration < config.iterations) {
    const auto s = train_step(state, config, worlds, episodes);
    acc.il += s.il;
    acc.rl += s.rl;
    acc.critic += s.critic;
    acc.entropy += s.entropy;
    ++count;
    if (state.iteration % config.log_interval == 0) {
      CurveRow row;
      row.iter = state.iteration;
      row.il = acc.il / count;
      row.rl = acc.rl / count;
      row.critic = acc.critic / count;
      row.entropy = acc.entropy / count;
      if (callbacks.validate) std::tie(row.val_sr, row.val_asks) = callbacks.validate(state.params);
      rows.push_back(row);
      lines.push_back(curve_line(row));
      acc = {};
      count = 0;
      flush();
    }
  }
  flush();
  return rows;
}

}  // namespace askroute::train
