#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "askroute/langgen.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::data {

struct LengthRange {
  int min_edges = 3;
  int max_edges = 6;
  friend bool operator==(const LengthRange&, const LengthRange&) = default;
};

struct Episode {
  int world = 0;  // index into the owning benchmark's world list
  int start = 0;
  int target = 0;
  std::vector<int> path;
  lang::Instruction instruction;
  std::uint64_t seed = 0;
  int path_id = -1;  // shared by episodes that describe the same trajectory
  friend bool operator==(const Episode&, const Episode&) = default;
};

void to_json(nlohmann::json& j, const Episode& e);
void from_json(const nlohmann::json& j, Episode& e);

/// Shortest-path trajectory between a uniformly drawn start and a target whose
/// edge distance lies in `range`; the instruction is generated from `seed` too.
Episode sample_episode(const world::WorldGraph& world, int world_index, std::uint64_t seed, LengthRange range,
                       double ambiguity);

/// Another instruction for the same trajectory.
Episode reinstruct(const world::WorldGraph& world, const Episode& episode, std::uint64_t seed, double ambiguity);

struct BenchmarkConfig {
  world::WorldConfig world;
  int train_worlds = 8;
  int unseen_worlds = 2;
  int train_episodes = 4000;
  int val_seen_episodes = 300;
  int unseen_paths = 300;
  int instructions_per_path = 3;
  LengthRange lengths;
  double ambiguity = 0.25;
  std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const BenchmarkConfig& c);
void from_json(const nlohmann::json& j, BenchmarkConfig& c);

struct Benchmark {
  BenchmarkConfig config;
  std::vector<world::WorldGraph> worlds;  // training worlds first, then unseen
  std::vector<Episode> train;
  std::vector<Episode> val_seen;
  std::vector<Episode> val_unseen;

  bool is_unseen(int world_index) const { return world_index >= config.train_worlds; }
  const world::WorldGraph& world_of(const Episode& e) const { return worlds.at(static_cast<std::size_t>(e.world)); }
};

Benchmark build_benchmark(const BenchmarkConfig& config);

/// Layout: benchmark.json, vocab.json, worlds/world_NN.askw, {train,val_seen,val_unseen}.jsonl.
void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& dir);
Benchmark load_benchmark(const std::filesystem::path& dir);

void save_episodes(const std::vector<Episode>& episodes, const std::filesystem::path& path);
std::vector<Episode> load_episodes(const std::filesystem::path& path);

/// Every episode's path is a walk in its world and its tokens are in range.
void check_episodes(const std::vector<world::WorldGraph>& worlds, const std::vector<Episode>& episodes);

}  // namespace askroute::data
