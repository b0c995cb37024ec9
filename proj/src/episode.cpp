#include "askroute/episode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "askroute/errors.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/jsonutil.hpp"
#include "askroute/rng.hpp"

namespace askroute::data {

namespace {

constexpr int kMaxAttempts = 64;

/// Edge count along the shortest-path tree rooted at `from`.
std::vector<int> hop_counts(const world::WorldGraph& w, int from) {
  const auto dist = world::distances_to(w, from);
  std::vector<int> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
  std::vector<int> hops(w.size(), -1);
  hops[static_cast<std::size_t>(from)] = 0;
  for (int v : order) {
    if (v == from) continue;
    for (const auto& edge : w.neighbors(v)) {
      const int u = edge.to;
      if (hops[static_cast<std::size_t>(u)] < 0) continue;
      if (std::abs(dist[u] + edge.length - dist[v]) < 1e-9) {
        const int h = hops[static_cast<std::size_t>(u)] + 1;
        if (hops[static_cast<std::size_t>(v)] < 0 || h < hops[static_cast<std::size_t>(v)]) hops[static_cast<std::size_t>(v)] = h;
      }
    }
  }
  return hops;
}

std::string world_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "world_%02d.askw", index);
  return buf;
}

}  // namespace

void to_json(nlohmann::json& j, const Episode& e) {
  j = {{"world", e.world},
       {"start", e.start},
       {"target", e.target},
       {"path", e.path},
       {"token_ids", e.instruction.token_ids},
       {"source", e.instruction.source == lang::Source::generated ? "generated" : "augmented"},
       {"seed", e.seed},
       {"path_id", e.path_id}};
}

void from_json(const nlohmann::json& j, Episode& e) {
  try {
    e.world = j.at("world").get<int>();
    e.start = j.at("start").get<int>();
    e.target = j.at("target").get<int>();
    e.path = j.at("path").get<std::vector<int>>();
    e.instruction.token_ids = j.at("token_ids").get<std::vector<int>>();
    const auto source = j.at("source").get<std::string>();
    if (source == "generated") e.instruction.source = lang::Source::generated;
    else if (source == "augmented") e.instruction.source = lang::Source::augmented;
    else throw DataError("episode: unknown instruction source '" + source + "'");
    e.seed = j.at("seed").get<std::uint64_t>();
    e.path_id = j.value("path_id", -1);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("episode: ") + ex.what());
  }
}

Episode sample_episode(const world::WorldGraph& w, int world_index, std::uint64_t seed, LengthRange range,
                       double ambiguity) {
  if (range.min_edges < 1 || range.max_edges > 10 || range.min_edges > range.max_edges) {
    throw ConfigError("sample_episode: length range must satisfy 1 <= min <= max <= 10");
  }
  Rng rng(derive_seed(seed, 0xe915));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int start = static_cast<int>(rng.below(w.size()));
    const auto hops = hop_counts(w, start);
    std::vector<int> candidates;
    for (std::size_t v = 0; v < hops.size(); ++v)
      if (hops[v] >= range.min_edges && hops[v] <= range.max_edges) candidates.push_back(static_cast<int>(v));
    if (candidates.empty()) continue;
    const int target = candidates[rng.below(candidates.size())];
    auto path = world::shortest_path(w, start, target);
    const int edges = static_cast<int>(path.size()) - 1;
    if (edges < range.min_edges || edges > range.max_edges) continue;
    Episode e;
    e.world = world_index;
    e.start = start;
    e.target = target;
    e.seed = seed;
    e.instruction = lang::generate_instruction(w, path, ambiguity, seed);
    e.path = std::move(path);
    return e;
  }
  throw DataError("sample_episode: no admissible target for lengths [" + std::to_string(range.min_edges) + ", " +
                  std::to_string(range.max_edges) + "] after " + std::to_string(kMaxAttempts) + " attempts");
}

Episode reinstruct(const world::WorldGraph& w, const Episode& episode, std::uint64_t seed, double ambiguity) {
  Episode e = episode;
  e.seed = seed;
  e.instruction = lang::generate_instruction(w, e.path, ambiguity, seed);
  return e;
}

void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
  j = {{"world", c.world},
       {"train_worlds", c.train_worlds},
       {"unseen_worlds", c.unseen_worlds},
       {"train_episodes", c.train_episodes},
       {"val_seen_episodes", c.val_seen_episodes},
       {"unseen_paths", c.unseen_paths},
       {"instructions_per_path", c.instructions_per_path},
       {"min_edges", c.lengths.min_edges},
       {"max_edges", c.lengths.max_edges},
       {"ambiguity", c.ambiguity},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
  constexpr std::string_view what = "data config";
  reject_unknown_keys(j,
                      {"world", "train_worlds", "unseen_worlds", "train_episodes", "val_seen_episodes", "unseen_paths",
                       "instructions_per_path", "min_edges", "max_edges", "ambiguity", "seed"},
                      what);
  read_optional(j, "world", c.world, what);
  read_optional(j, "train_worlds", c.train_worlds, what);
  read_optional(j, "unseen_worlds", c.unseen_worlds, what);
  read_optional(j, "train_episodes", c.train_episodes, what);
  read_optional(j, "val_seen_episodes", c.val_seen_episodes, what);
  read_optional(j, "unseen_paths", c.unseen_paths, what);
  read_optional(j, "instructions_per_path", c.instructions_per_path, what);
  read_optional(j, "min_edges", c.lengths.min_edges, what);
  read_optional(j, "max_edges", c.lengths.max_edges, what);
  read_optional(j, "ambiguity", c.ambiguity, what);
  read_optional(j, "seed", c.seed, what);
}

Benchmark build_benchmark(const BenchmarkConfig& config) {
  if (config.train_worlds < 1 || config.unseen_worlds < 1) throw ConfigError("benchmark: need at least one world per split");
  if (config.train_episodes < 1 || config.val_seen_episodes < 0 || config.unseen_paths < 1 || config.instructions_per_path < 1) {
    throw ConfigError("benchmark: episode counts must be positive");
  }
  if (config.ambiguity < 0.0 || config.ambiguity > 1.0) throw ConfigError("benchmark: ambiguity outside [0,1]");
  Benchmark b;
  b.config = config;
  const int total_worlds = config.train_worlds + config.unseen_worlds;
  for (int i = 0; i < total_worlds; ++i) {
    b.worlds.push_back(world::generate_world(config.world, derive_seed(config.seed, 0x3000 + static_cast<std::uint64_t>(i))));
  }
  auto sample_split = [&](int count, std::uint64_t salt, std::vector<Episode>& out) {
    for (int i = 0; i < count; ++i) {
      const int wi = i % config.train_worlds;
      auto e = sample_episode(b.worlds[static_cast<std::size_t>(wi)], wi,
                              derive_seed(config.seed, salt + static_cast<std::uint64_t>(i)), config.lengths, config.ambiguity);
      e.path_id = i;
      out.push_back(std::move(e));
    }
  };
  sample_split(config.train_episodes, 0x100000, b.train);
  sample_split(config.val_seen_episodes, 0x200000, b.val_seen);
  for (int p = 0; p < config.unseen_paths; ++p) {
    const int wi = config.train_worlds + p % config.unseen_worlds;
    const auto& w = b.worlds[static_cast<std::size_t>(wi)];
    const std::uint64_t base = derive_seed(config.seed, 0x300000 + static_cast<std::uint64_t>(p));
    auto first = sample_episode(w, wi, base, config.lengths, config.ambiguity);
    first.path_id = p;
    b.val_unseen.push_back(first);
    for (int k = 1; k < config.instructions_per_path; ++k) {
      b.val_unseen.push_back(reinstruct(w, first, derive_seed(base, static_cast<std::uint64_t>(k)), config.ambiguity));
    }
  }
  return b;
}

void save_episodes(const std::vector<Episode>& episodes, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : episodes) {
    out += nlohmann::json(e).dump();
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<Episode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<Episode>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_benchmark(const Benchmark& b, const std::filesystem::path& dir) {
  io::write_file_atomic(dir / "benchmark.json", nlohmann::json(b.config).dump(2) + "\n");
  io::write_file_atomic(dir / "vocab.json", lang::vocabulary_json().dump() + "\n");
  for (std::size_t i = 0; i < b.worlds.size(); ++i) world::save_world(b.worlds[i], dir / "worlds" / world_file(static_cast<int>(i)));
  save_episodes(b.train, dir / "train.jsonl");
  save_episodes(b.val_seen, dir / "val_seen.jsonl");
  save_episodes(b.val_unseen, dir / "val_unseen.jsonl");
}

Benchmark load_benchmark(const std::filesystem::path& dir) {
  Benchmark b;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(dir / "benchmark.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("benchmark.json: " + std::string(e.what()));
  }
  b.config = j.get<BenchmarkConfig>();
  const int total = b.config.train_worlds + b.config.unseen_worlds;
  for (int i = 0; i < total; ++i) b.worlds.push_back(world::load_world(dir / "worlds" / world_file(i)));
  b.train = load_episodes(dir / "train.jsonl");
  b.val_seen = load_episodes(dir / "val_seen.jsonl");
  b.val_unseen = load_episodes(dir / "val_unseen.jsonl");
  check_episodes(b.worlds, b.train);
  check_episodes(b.worlds, b.val_seen);
  check_episodes(b.worlds, b.val_unseen);
  return b;
}

void check_episodes(const std::vector<world::WorldGraph>& worlds, const std::vector<Episode>& episodes) {
  const auto vocab = static_cast<int>(lang::vocabulary().size());
  for (const auto& e : episodes) {
    if (e.world < 0 || static_cast<std::size_t>(e.world) >= worlds.size()) throw DataError("episode: world index out of range");
    const auto& w = worlds[static_cast<std::size_t>(e.world)];
    if (e.path.empty() || e.path.front() != e.start || e.path.back() != e.target) throw DataError("episode: path endpoints disagree");
    for (int v : e.path)
      if (v < 0 || static_cast<std::size_t>(v) >= w.size()) throw DataError("episode: viewpoint out of range");
    for (std::size_t i = 1; i < e.path.size(); ++i)
      if (!w.adjacent(e.path[i - 1], e.path[i])) throw DataError("episode: path is not a walk in its world");
    if (e.instruction.token_ids.empty()) throw DataError("episode: empty instruction");
    for (int t : e.instruction.token_ids)
      if (t < 0 || t >= vocab) throw DataError("episode: token id out of range");
  }
}

}  // namespace askroute::data
