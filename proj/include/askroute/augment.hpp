#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "askroute/episode.hpp"
#include "askroute/interact.hpp"
#include "askroute/navpolicy.hpp"
#include "askroute/trainer.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::augment {

/// T_a share of the interaction/evaluation split (1500 of 2349).
inline constexpr double kTeachShare = 1500.0 / 2349.0;

enum class SplitMode { disjoint, random };

SplitMode parse_split_mode(const std::string& name);
std::string split_mode_name(SplitMode mode);

struct DatasetSplit {
  std::vector<data::Episode> t_a;
  std::vector<data::Episode> t_b;
  SplitMode mode = SplitMode::disjoint;
};

/// Disjoint: trajectories are shuffled and whole trajectory groups go to T_a
/// until it holds its share. Random: episodes are shuffled and cut at the share.
DatasetSplit split(const std::vector<data::Episode>& episodes, SplitMode mode, std::uint64_t seed);

enum class Provenance { human_guided, pre_exploration };

std::string provenance_name(Provenance p);

struct AugmentedItem {
  int world = 0;
  lang::Instruction instruction;
  std::vector<int> trajectory;        // viewpoints, start first
  std::vector<std::size_t> actions;   // executed action per step, stop last
  Provenance provenance = Provenance::human_guided;
  bool truncated = false;
  int path_id = -1;                   // source episode's trajectory, -1 if none
};

void to_json(nlohmann::json& j, const AugmentedItem& item);
void from_json(const nlohmann::json& j, AugmentedItem& item);

/// Action indices that walk `trajectory` and then stop; throws DataError if
/// the walk leaves the graph.
std::vector<std::size_t> trajectory_actions(const world::WorldGraph& world, const std::vector<int>& trajectory);

/// Every item replays in its world.
void check_items(const std::vector<world::WorldGraph>& worlds, const std::vector<AugmentedItem>& items);

/// Runs `kind` with a perfect oracle over T_a and keeps the executed walks
/// under the original instructions.
std::vector<AugmentedItem> collect_interactions(agent::AgentKind kind, const policy::ModelParams& params,
                                                const std::vector<world::WorldGraph>& worlds,
                                                const std::vector<data::Episode>& t_a, agent::RunOptions options);

/// `n` shortest-path walks in `world_indices`, described by an unambiguous speaker.
std::vector<AugmentedItem> pre_exploration_data(const std::vector<world::WorldGraph>& worlds,
                                                const std::vector<int>& world_indices, int n, std::uint64_t seed,
                                                data::LengthRange lengths = {});

void save_items(const std::vector<AugmentedItem>& items, const std::filesystem::path& path);
std::vector<AugmentedItem> load_items(const std::filesystem::path& path);

enum class FinetuneMode { supervised, mixed };

FinetuneMode parse_finetune_mode(const std::string& name);

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::mixed;
  double epochs = 3.0;
  /// Iteration count when non-negative, overriding `epochs`.
  int iterations = -1;
  bool include_truncated = false;
  bool reset_optimizer = true;
  train::TrainConfig train;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

/// Items as training episodes: the walk is the reference path and its end
/// the target.
std::vector<data::Episode> as_episodes(const std::vector<AugmentedItem>& items);

/// Continues training `params` on the items with asking switched off.
/// `optimizer` carries over the source run's moments when reset_optimizer
/// is off.
policy::ModelParams finetune(const policy::ModelParams& params, const std::vector<world::WorldGraph>& worlds,
                             const std::vector<AugmentedItem>& items, const FinetuneConfig& config,
                             const diff::Optimizer<float>* optimizer = nullptr);

struct CurvePoint {
  int size = 0;
  double human_sr = 0.0;
  double preexp_sr = 0.0;
};

/// For each size, fine-tunes separately on the first `size` human-guided and
/// pre-exploration items and scores the base agent on T_b.
std::vector<CurvePoint> data_efficiency_curve(const policy::ModelParams& params,
                                              const std::vector<world::WorldGraph>& worlds,
                                              const std::vector<AugmentedItem>& human,
                                              const std::vector<AugmentedItem>& preexp,
                                              const std::vector<data::Episode>& t_b, const std::vector<int>& sizes,
                                              const FinetuneConfig& config, int max_steps = 20);

std::string curve_csv(const std::vector<CurvePoint>& points);
std::vector<CurvePoint> read_curve_csv(const std::filesystem::path& path);

}  // namespace askroute::augment
