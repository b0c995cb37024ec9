#include "askroute/augment.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <utility>

#include "askroute/errors.hpp"
#include "askroute/evalkit.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/jsonutil.hpp"
#include "askroute/rng.hpp"

namespace askroute::augment {

SplitMode parse_split_mode(const std::string& name) {
  if (name == "disjoint") return SplitMode::disjoint;
  if (name == "random") return SplitMode::random;
  throw ConfigError("unknown split mode '" + name + "'");
}

std::string split_mode_name(SplitMode mode) { return mode == SplitMode::disjoint ? "disjoint" : "random"; }

DatasetSplit split(const std::vector<data::Episode>& episodes, SplitMode mode, std::uint64_t seed) {
  const std::size_t n = episodes.size();
  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * kTeachShare));
  std::vector<bool> in_a(n, false);
  Rng rng(seed);

  if (mode == SplitMode::random) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm.begin(), perm.end());
    for (std::size_t i = 0; i < target; ++i) in_a[perm[i]] = true;
  } else {
    std::map<std::pair<int, std::vector<int>>, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = group_of.try_emplace({episodes[i].world, episodes[i].path}, groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    if (groups.size() < 2) {
      throw DataError("split: disjoint mode needs at least two distinct trajectories, found " +
                      std::to_string(groups.size()));
    }
    rng.shuffle(groups.begin(), groups.end());
    std::size_t taken = 0;
    for (std::size_t g = 0; g + 1 < groups.size() && taken < target; ++g) {
      for (auto i : groups[g]) in_a[i] = true;
      taken += groups[g].size();
    }
  }

  DatasetSplit out;
  out.mode = mode;
  for (std::size_t i = 0; i < n; ++i) (in_a[i] ? out.t_a : out.t_b).push_back(episodes[i]);
  return out;
}

std::string provenance_name(Provenance p) {
  return p == Provenance::human_guided ? "human_guided" : "pre_exploration";
}

void to_json(nlohmann::json& j, const AugmentedItem& item) {
  j = {{"world", item.world},
       {"token_ids", item.instruction.token_ids},
       {"source", item.instruction.source == lang::Source::generated ? "generated" : "augmented"},
       {"trajectory", item.trajectory},
       {"actions", item.actions},
       {"provenance", provenance_name(item.provenance)},
       {"truncated", item.truncated},
       {"path_id", item.path_id}};
}

void from_json(const nlohmann::json& j, AugmentedItem& item) {
  try {
    item.world = j.at("world").get<int>();
    item.instruction.token_ids = j.at("token_ids").get<std::vector<int>>();
    const auto source = j.at("source").get<std::string>();
    if (source == "generated") item.instruction.source = lang::Source::generated;
    else if (source == "augmented") item.instruction.source = lang::Source::augmented;
    else throw DataError("augmented item: unknown instruction source '" + source + "'");
    item.trajectory = j.at("trajectory").get<std::vector<int>>();
    item.actions = j.at("actions").get<std::vector<std::size_t>>();
    const auto prov = j.at("provenance").get<std::string>();
    if (prov == "human_guided") item.provenance = Provenance::human_guided;
    else if (prov == "pre_exploration") item.provenance = Provenance::pre_exploration;
    else throw DataError("augmented item: unknown provenance '" + prov + "'");
    item.truncated = j.at("truncated").get<bool>();
    item.path_id = j.value("path_id", -1);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("augmented item: ") + e.what());
  }
}

std::vector<std::size_t> trajectory_actions(const world::WorldGraph& w, const std::vector<int>& trajectory) {
  if (trajectory.empty()) throw DataError("trajectory_actions: empty trajectory");
  std::vector<std::size_t> out;
  double heading = 0.0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const int at = trajectory[i];
    if (at < 0 || static_cast<std::size_t>(at) >= w.size()) throw DataError("trajectory_actions: viewpoint out of range");
    const auto actions = world::navigable_actions(w, at, heading);
    if (i + 1 == trajectory.size()) {
      out.push_back(actions.stop_index());
      break;
    }
    const auto idx = actions.index_of(trajectory[i + 1]);
    if (idx == world::ActionSet::npos) {
      throw DataError("trajectory_actions: no edge " + std::to_string(at) + " -> " + std::to_string(trajectory[i + 1]));
    }
    out.push_back(idx);
    heading = world::bearing(w, at, trajectory[i + 1]);
  }
  return out;
}

void check_items(const std::vector<world::WorldGraph>& worlds, const std::vector<AugmentedItem>& items) {
  for (const auto& item : items) {
    if (item.world < 0 || static_cast<std::size_t>(item.world) >= worlds.size()) {
      throw DataError("augmented item: world " + std::to_string(item.world) + " out of range");
    }
    if (trajectory_actions(worlds[static_cast<std::size_t>(item.world)], item.trajectory) != item.actions) {
      throw DataError("augmented item: actions do not replay the trajectory");
    }
  }
}

std::vector<AugmentedItem> collect_interactions(agent::AgentKind kind, const policy::ModelParams& params,
                                                const std::vector<world::WorldGraph>& worlds,
                                                const std::vector<data::Episode>& t_a, agent::RunOptions options) {
  options.oracle.noise_c = 0.0;
  const auto traces = agent::run_all(kind, params, worlds, t_a, options);
  std::vector<AugmentedItem> items;
  items.reserve(traces.size());
  for (const auto& t : traces) {
    AugmentedItem item;
    item.world = t.episode.world;
    item.instruction = t.episode.instruction;
    item.trajectory = t.visited;
    item.actions = trajectory_actions(worlds.at(static_cast<std::size_t>(t.episode.world)), t.visited);
    item.provenance = Provenance::human_guided;
    item.truncated = t.truncated;
    item.path_id = t.episode.path_id;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<AugmentedItem> pre_exploration_data(const std::vector<world::WorldGraph>& worlds,
                                                const std::vector<int>& world_indices, int n, std::uint64_t seed,
                                                data::LengthRange lengths) {
  if (n < 1) throw ConfigError("pre_exploration_data: n must be at least 1");
  if (world_indices.empty()) throw ConfigError("pre_exploration_data: no worlds");
  std::vector<AugmentedItem> items;
  items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int wi = world_indices[static_cast<std::size_t>(i) % world_indices.size()];
    const auto& w = worlds.at(static_cast<std::size_t>(wi));
    auto e = data::sample_episode(w, wi, derive_seed(seed, static_cast<std::uint64_t>(i)), lengths, 0.0);
    AugmentedItem item;
    item.world = wi;
    item.instruction = e.instruction;
    item.instruction.source = lang::Source::augmented;
    item.actions = trajectory_actions(w, e.path);
    item.trajectory = std::move(e.path);
    item.provenance = Provenance::pre_exploration;
    items.push_back(std::move(item));
  }
  return items;
}

void save_items(const std::vector<AugmentedItem>& items, const std::filesystem::path& path) {
  std::string out;
  for (const auto& item : items) {
    out += nlohmann::json(item).dump();
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

std::vector<AugmentedItem> load_items(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<AugmentedItem> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<AugmentedItem>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

FinetuneMode parse_finetune_mode(const std::string& name) {
  if (name == "supervised") return FinetuneMode::supervised;
  if (name == "mixed") return FinetuneMode::mixed;
  throw ConfigError("unknown fine-tune mode '" + name + "'");
}

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
  j = {{"mode", c.mode == FinetuneMode::supervised ? "supervised" : "mixed"},
       {"epochs", c.epochs},
       {"iterations", c.iterations},
       {"include_truncated", c.include_truncated},
       {"reset_optimizer", c.reset_optimizer},
       {"train", c.train}};
}

void from_json(const nlohmann::json& j, FinetuneConfig& c) {
  constexpr const char* what = "finetune config";
  reject_unknown_keys(j, {"mode", "epochs", "iterations", "include_truncated", "reset_optimizer", "train"}, what);
  std::string mode = c.mode == FinetuneMode::supervised ? "supervised" : "mixed";
  read_optional(j, "mode", mode, what);
  c.mode = parse_finetune_mode(mode);
  read_optional(j, "epochs", c.epochs, what);
  read_optional(j, "iterations", c.iterations, what);
  read_optional(j, "include_truncated", c.include_truncated, what);
  read_optional(j, "reset_optimizer", c.reset_optimizer, what);
  if (auto it = j.find("train"); it != j.end()) {
    nlohmann::json merged = c.train;
    merged.merge_patch(*it);
    c.train = merged.get<train::TrainConfig>();
  }
  if (!(c.epochs >= 0.0)) throw ConfigError("finetune config: epochs must be non-negative");
}

std::vector<data::Episode> as_episodes(const std::vector<AugmentedItem>& items) {
  std::vector<data::Episode> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    data::Episode e;
    e.world = item.world;
    e.start = item.trajectory.front();
    e.target = item.trajectory.back();
    e.path = item.trajectory;
    e.instruction = item.instruction;
    e.path_id = item.path_id;
    out.push_back(std::move(e));
  }
  return out;
}

policy::ModelParams finetune(const policy::ModelParams& params, const std::vector<world::WorldGraph>& worlds,
                             const std::vector<AugmentedItem>& items, const FinetuneConfig& config,
                             const diff::Optimizer<float>* optimizer) {
  std::vector<AugmentedItem> usable;
  for (const auto& item : items)
    if (config.include_truncated || !item.truncated) usable.push_back(item);
  if (usable.empty()) throw DataError("finetune: empty augmented set");
  check_items(worlds, usable);

  auto tc = config.train;
  tc.ask_enabled = false;
  if (config.mode == FinetuneMode::supervised) tc.rl_weight = 0.0;
  tc.iterations = config.iterations >= 0
                      ? config.iterations
                      : static_cast<int>(std::ceil(config.epochs * static_cast<double>(usable.size()) / tc.batch_size));
  if (tc.iterations == 0) return params;
  tc.log_interval = tc.iterations;

  auto state = train::make_state(tc, policy::with_ask(params, false));
  if (!config.reset_optimizer && optimizer) {
    state.optimizer.restore(optimizer->first_moment(), optimizer->second_moment(), optimizer->steps());
  }
  if (state.params.config.ask_enabled) throw ConfigError("finetune: the ask action must stay disabled");
  train::train(state, tc, worlds, as_episodes(usable), {});
  return state.params;
}

std::vector<CurvePoint> data_efficiency_curve(const policy::ModelParams& params,
                                              const std::vector<world::WorldGraph>& worlds,
                                              const std::vector<AugmentedItem>& human,
                                              const std::vector<AugmentedItem>& preexp,
                                              const std::vector<data::Episode>& t_b, const std::vector<int>& sizes,
                                              const FinetuneConfig& config, int max_steps) {
  std::vector<AugmentedItem> usable;
  for (const auto& item : human)
    if (config.include_truncated || !item.truncated) usable.push_back(item);

  agent::RunOptions options;
  options.max_steps = max_steps;
  auto score = [&](const policy::ModelParams& p) {
    return eval::aggregate(worlds, agent::run_all(agent::AgentKind::base, p, worlds, t_b, options)).success_rate;
  };
  const double base_sr = score(policy::with_ask(params, false));

  std::vector<CurvePoint> out;
  for (int s : sizes) {
    if (s < 0 || static_cast<std::size_t>(s) > usable.size() || static_cast<std::size_t>(s) > preexp.size()) {
      throw ConfigError("data_efficiency_curve: size " + std::to_string(s) + " exceeds the available items");
    }
    CurvePoint p{s, base_sr, base_sr};
    if (s > 0) {
      const auto n = static_cast<std::ptrdiff_t>(s);
      p.human_sr = score(finetune(params, worlds, {usable.begin(), usable.begin() + n}, config));
      p.preexp_sr = score(finetune(params, worlds, {preexp.begin(), preexp.begin() + n}, config));
    }
    out.push_back(p);
  }
  return out;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out = "size,human_sr,preexp_sr\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", p.size, p.human_sr, p.preexp_sr);
    out += buf;
  }
  return out;
}

std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "size,human_sr,preexp_sr") throw DataError(path.string() + ": not a curve CSV");
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &p.size, &p.human_sr, &p.preexp_sr) != 3) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace askroute::augment
