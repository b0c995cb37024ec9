#include "askroute/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>

#include "askroute/errors.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/rng.hpp"

namespace askroute::world {

double wrap_angle(double radians) {
  double a = std::fmod(radians, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

WorldGraph::WorldGraph(WorldConfig config, std::uint64_t seed, std::vector<Viewpoint> viewpoints,
                       std::vector<std::vector<Edge>> adjacency, std::vector<std::vector<float>> landmark_embeddings)
    : config_(config),
      seed_(seed),
      viewpoints_(std::move(viewpoints)),
      adjacency_(std::move(adjacency)),
      embeddings_(std::move(landmark_embeddings)) {
  if (adjacency_.size() != viewpoints_.size()) throw DataError("world: adjacency size does not match viewpoints");
  for (std::size_t i = 0; i < viewpoints_.size(); ++i) {
    const auto& v = viewpoints_[i];
    if (v.id != static_cast<int>(i)) throw DataError("world: viewpoint ids must be dense 0..N-1");
    if (!std::isfinite(v.position.x) || !std::isfinite(v.position.y) || !std::isfinite(v.position.z)) {
      throw DataError("world: non-finite position at viewpoint " + std::to_string(i));
    }
    if (v.landmark < 0 || static_cast<std::size_t>(v.landmark) >= embeddings_.size()) {
      throw DataError("world: landmark out of vocabulary at viewpoint " + std::to_string(i));
    }
    std::sort(adjacency_[i].begin(), adjacency_[i].end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
  }
  for (const auto& e : embeddings_) {
    if (e.size() != static_cast<std::size_t>(config_.embed_dim)) throw DataError("world: embedding width mismatch");
  }
}

void WorldGraph::check_id(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= viewpoints_.size()) {
    throw std::out_of_range("world: invalid viewpoint id " + std::to_string(id));
  }
}

const Viewpoint& WorldGraph::viewpoint(int id) const {
  check_id(id);
  return viewpoints_[static_cast<std::size_t>(id)];
}

std::span<const Edge> WorldGraph::neighbors(int id) const {
  check_id(id);
  return adjacency_[static_cast<std::size_t>(id)];
}

bool WorldGraph::adjacent(int a, int b) const {
  for (const auto& e : neighbors(a))
    if (e.to == b) return true;
  return false;
}

std::size_t WorldGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& adj : adjacency_) n += adj.size();
  return n / 2;
}

std::span<const float> WorldGraph::embedding(int landmark) const {
  if (landmark < 0 || static_cast<std::size_t>(landmark) >= embeddings_.size()) {
    throw std::out_of_range("world: landmark id " + std::to_string(landmark));
  }
  return embeddings_[static_cast<std::size_t>(landmark)];
}

std::vector<std::vector<float>> make_landmark_embeddings(int vocab, int dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1a4d));
  std::vector<std::vector<float>> table(static_cast<std::size_t>(vocab), std::vector<float>(static_cast<std::size_t>(dim)));
  for (auto& row : table)
    for (float& v : row) v = static_cast<float>(0.5 * rng.normal());
  return table;
}

namespace {

double euclid(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }
};

std::vector<Vec3> layout_positions(const WorldConfig& c, Rng& rng) {
  const auto n = static_cast<std::size_t>(c.num_viewpoints);
  std::vector<Vec3> pos(n);
  if (c.layout == Layout::line) {
    for (std::size_t i = 0; i < n; ++i) pos[i] = {static_cast<double>(i) * c.spacing + rng.uniform(-c.jitter, c.jitter), 0.0, 0.0};
    return pos;
  }
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i % side) * c.spacing + rng.uniform(-c.jitter, c.jitter);
    const double y = static_cast<double>(i / side) * c.spacing + rng.uniform(-c.jitter, c.jitter);
    pos[i] = {x, y, 0.0};
  }
  return pos;
}

// Neighbours of a viewpoint must carry pairwise distinct landmarks before
// duplication, and differ from the viewpoint's own landmark.
std::vector<int> assign_landmarks(const std::vector<std::set<int>>& adj, int vocab, double duplicate_rate, Rng& rng) {
  const std::size_t n = adj.size();
  std::vector<int> landmark(n, -1);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  std::vector<int> usage(static_cast<std::size_t>(vocab), 0);
  for (int v : order) {
    std::vector<int> conflicts(static_cast<std::size_t>(vocab), 0);
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (landmark[static_cast<std::size_t>(u)] >= 0) ++conflicts[static_cast<std::size_t>(landmark[static_cast<std::size_t>(u)])];
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (w != v && landmark[static_cast<std::size_t>(w)] >= 0) ++conflicts[static_cast<std::size_t>(landmark[static_cast<std::size_t>(w)])];
      }
    }
    const int fewest = *std::min_element(conflicts.begin(), conflicts.end());
    std::vector<int> allowed;
    for (int l = 0; l < vocab; ++l)
      if (conflicts[static_cast<std::size_t>(l)] == fewest) allowed.push_back(l);
    const int pick = allowed[rng.below(allowed.size())];
    landmark[static_cast<std::size_t>(v)] = pick;
    ++usage[static_cast<std::size_t>(pick)];
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!rng.bernoulli(duplicate_rate)) continue;
    std::vector<int> siblings;
    for (int u : adj[v])
      for (int w : adj[static_cast<std::size_t>(u)])
        if (w != static_cast<int>(v) && !adj[v].count(w)) siblings.push_back(w);
    if (siblings.empty()) continue;
    landmark[v] = landmark[static_cast<std::size_t>(siblings[rng.below(siblings.size())])];
  }
  return landmark;
}

}  // namespace

WorldGraph generate_world(const WorldConfig& config, std::uint64_t seed) {
  if (config.num_viewpoints < 4) throw ConfigError("generate_world: need at least 4 viewpoints, got " + std::to_string(config.num_viewpoints));
  if (config.landmark_vocab < 2 || config.embed_dim < 1) throw ConfigError("generate_world: landmark_vocab >= 2 and embed_dim >= 1 required");
  if (!(config.min_edge > 0.0 && config.max_edge >= config.min_edge)) throw ConfigError("generate_world: bad edge length range");
  if (config.duplicate_rate < 0.0 || config.duplicate_rate > 1.0) throw ConfigError("generate_world: duplicate_rate outside [0,1]");

  const auto n = static_cast<std::size_t>(config.num_viewpoints);
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    const auto pos = layout_positions(config, rng);

    std::vector<std::pair<int, int>> candidates;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = euclid(pos[i], pos[j]);
        if (d >= config.min_edge && d <= config.max_edge) candidates.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    rng.shuffle(candidates.begin(), candidates.end());

    DisjointSets sets(n);
    std::vector<std::set<int>> adj(n);
    std::vector<std::pair<int, int>> spare;
    std::size_t edges = 0;
    for (const auto& [a, b] : candidates) {
      if (sets.unite(a, b)) {
        adj[static_cast<std::size_t>(a)].insert(b);
        adj[static_cast<std::size_t>(b)].insert(a);
        ++edges;
      } else {
        spare.emplace_back(a, b);
      }
    }
    if (edges != n - 1) continue;
    for (const auto& [a, b] : spare) {
      if (2.0 * static_cast<double>(edges) / static_cast<double>(n) >= config.target_degree) break;
      adj[static_cast<std::size_t>(a)].insert(b);
      adj[static_cast<std::size_t>(b)].insert(a);
      ++edges;
    }

    const auto landmarks = assign_landmarks(adj, config.landmark_vocab, config.duplicate_rate, rng);
    std::vector<Viewpoint> vps(n);
    std::vector<std::vector<Edge>> adjacency(n);
    for (std::size_t i = 0; i < n; ++i) {
      vps[i] = {static_cast<int>(i), pos[i], landmarks[i]};
      for (int j : adj[i]) adjacency[i].push_back({j, euclid(pos[i], pos[static_cast<std::size_t>(j)])});
    }
    return WorldGraph(config, seed, std::move(vps), std::move(adjacency),
                      make_landmark_embeddings(config.landmark_vocab, config.embed_dim, config.embedding_seed));
  }
  throw DataError("generate_world: no connected layout after " + std::to_string(config.max_retries) + " attempts");
}

double distance(const WorldGraph& world, int a, int b) { return euclid(world.position(a), world.position(b)); }

double bearing(const WorldGraph& world, int a, int b) {
  const auto& p = world.position(a);
  const auto& q = world.position(b);
  return std::atan2(q.y - p.y, q.x - p.x);
}

std::vector<double> distances_to(const WorldGraph& world, int target) {
  world.check_id(target);
  std::vector<double> dist(world.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<std::size_t>(target)] = 0.0;
  queue.emplace(0.0, target);
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    for (const auto& e : world.neighbors(v)) {
      const double nd = d + e.length;
      if (nd < dist[static_cast<std::size_t>(e.to)]) {
        dist[static_cast<std::size_t>(e.to)] = nd;
        queue.emplace(nd, e.to);
      }
    }
  }
  return dist;
}

std::vector<int> shortest_path(const WorldGraph& world, int from, int to) {
  world.check_id(from);
  const auto dist = distances_to(world, to);
  if (!std::isfinite(dist[static_cast<std::size_t>(from)])) {
    throw DataError("shortest_path: viewpoint " + std::to_string(to) + " unreachable from " + std::to_string(from));
  }
  constexpr double kTieTolerance = 1e-9;
  std::vector<int> path{from};
  int v = from;
  while (v != to) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& e : world.neighbors(v)) {
      const double cost = e.length + dist[static_cast<std::size_t>(e.to)];
      if (cost < best_cost - kTieTolerance) {
        best_cost = cost;
        best = e.to;
      }
    }
    path.push_back(best);
    v = best;
    if (path.size() > world.size()) throw DataError("shortest_path: failed to converge");
  }
  return path;
}

double path_length(const WorldGraph& world, std::span<const int> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += distance(world, path[i - 1], path[i]);
  return total;
}

namespace {

std::size_t sector_of(double relative_heading) {
  const auto k = static_cast<long>(std::lround(relative_heading / kSectorWidth));
  const auto m = static_cast<long>(kHeadingSectors);
  return static_cast<std::size_t>(((k % m) + m) % m);
}

}  // namespace

ViewFeature view_features(const WorldGraph& world, int at, double heading) {
  const std::size_t dim = world.embed_dim();
  ViewFeature out;
  out.row_dim = dim + kAngleFeatures;
  out.rows.assign(kViewSlots * out.row_dim, 0.0f);
  out.sources.fill(-1);

  std::array<double, kHeadingSectors> nearest{};
  nearest.fill(std::numeric_limits<double>::infinity());
  for (const auto& e : world.neighbors(at)) {
    const std::size_t sector = sector_of(wrap_angle(bearing(world, at, e.to) - heading));
    const std::size_t slot = kLevelBand * kHeadingSectors + sector;
    // Neighbours arrive in id order, so strict < keeps the smaller id on ties.
    if (e.length < nearest[sector]) {
      nearest[sector] = e.length;
      out.sources[slot] = e.to;
    }
  }

  for (std::size_t band = 0; band < kElevationBands; ++band) {
    for (std::size_t s = 0; s < kHeadingSectors; ++s) {
      const std::size_t slot = band * kHeadingSectors + s;
      const double theta = wrap_angle(static_cast<double>(s) * kSectorWidth);
      const double phi = kBandElevations[band];
      out.headings[slot] = theta;
      out.elevations[slot] = phi;
      float* row = out.rows.data() + slot * out.row_dim;
      if (out.sources[slot] >= 0) {
        const auto emb = world.embedding(world.landmark(out.sources[slot]));
        std::copy(emb.begin(), emb.end(), row);
      }
      row[dim + 0] = static_cast<float>(std::sin(theta));
      row[dim + 1] = static_cast<float>(std::cos(theta));
      row[dim + 2] = static_cast<float>(std::sin(phi));
      row[dim + 3] = static_cast<float>(std::cos(phi));
    }
  }
  return out;
}

std::vector<float> move_feature(const WorldGraph& world, int destination, double relative_heading) {
  const std::size_t dim = world.embed_dim();
  std::vector<float> f(dim + kAngleFeatures, 0.0f);
  const auto emb = world.embedding(world.landmark(destination));
  std::copy(emb.begin(), emb.end(), f.begin());
  f[dim + 0] = static_cast<float>(std::sin(relative_heading));
  f[dim + 1] = static_cast<float>(std::cos(relative_heading));
  f[dim + 2] = 0.0f;
  f[dim + 3] = 1.0f;
  return f;
}

std::size_t ActionSet::index_of(int destination) const {
  for (std::size_t i = 0; i < moves.size(); ++i)
    if (moves[i].destination == destination) return i;
  return npos;
}

ActionSet navigable_actions(const WorldGraph& world, int at, double heading) {
  ActionSet set;
  set.feature_dim = world.embed_dim() + kAngleFeatures;
  for (const auto& e : world.neighbors(at)) {
    const double rel = wrap_angle(bearing(world, at, e.to) - heading);
    set.moves.push_back({e.to, rel, move_feature(world, e.to, rel)});
  }
  std::stable_sort(set.moves.begin(), set.moves.end(), [](const Move& a, const Move& b) {
    return std::tie(a.heading, a.destination) < std::tie(b.heading, b.destination);
  });
  return set;
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = {{"num_viewpoints", c.num_viewpoints},
       {"layout", c.layout == Layout::grid ? "grid" : "line"},
       {"spacing", c.spacing},
       {"jitter", c.jitter},
       {"min_edge", c.min_edge},
       {"max_edge", c.max_edge},
       {"target_degree", c.target_degree},
       {"landmark_vocab", c.landmark_vocab},
       {"duplicate_rate", c.duplicate_rate},
       {"embed_dim", c.embed_dim},
       {"embedding_seed", c.embedding_seed},
       {"max_retries", c.max_retries}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  static const std::set<std::string> known{"num_viewpoints", "layout", "spacing", "jitter", "min_edge", "max_edge",
                                           "target_degree", "landmark_vocab", "duplicate_rate", "embed_dim",
                                           "embedding_seed", "max_retries"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("world config: unknown key '" + key + "'");
  c.num_viewpoints = j.value("num_viewpoints", c.num_viewpoints);
  if (j.contains("layout")) {
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "grid") c.layout = Layout::grid;
    else if (layout == "line") c.layout = Layout::line;
    else throw ConfigError("world config: unknown layout '" + layout + "'");
  }
  c.spacing = j.value("spacing", c.spacing);
  c.jitter = j.value("jitter", c.jitter);
  c.min_edge = j.value("min_edge", c.min_edge);
  c.max_edge = j.value("max_edge", c.max_edge);
  c.target_degree = j.value("target_degree", c.target_degree);
  c.landmark_vocab = j.value("landmark_vocab", c.landmark_vocab);
  c.duplicate_rate = j.value("duplicate_rate", c.duplicate_rate);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.embedding_seed = j.value("embedding_seed", c.embedding_seed);
  c.max_retries = j.value("max_retries", c.max_retries);
}

void to_json(nlohmann::json& j, const WorldGraph& w) {
  nlohmann::json vps = nlohmann::json::array();
  for (const auto& v : w.viewpoints()) {
    vps.push_back({{"id", v.id}, {"position", {v.position.x, v.position.y, v.position.z}}, {"landmark", v.landmark}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& v : w.viewpoints())
    for (const auto& e : w.neighbors(v.id))
      if (v.id < e.to) edges.push_back({v.id, e.to, e.length});
  j = {{"version", 1},
       {"seed", w.seed()},
       {"config", w.config()},
       {"viewpoints", std::move(vps)},
       {"edges", std::move(edges)},
       {"landmark_embeddings", w.landmark_embeddings()}};
}

WorldGraph world_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw DataError("world: unsupported version");
    const auto config = j.at("config").get<WorldConfig>();
    std::vector<Viewpoint> vps;
    for (const auto& v : j.at("viewpoints")) {
      const auto p = v.at("position");
      vps.push_back({v.at("id").get<int>(), {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()},
                     v.at("landmark").get<int>()});
    }
    std::vector<std::vector<Edge>> adjacency(vps.size());
    for (const auto& e : j.at("edges")) {
      const int a = e.at(0).get<int>(), b = e.at(1).get<int>();
      const double len = e.at(2).get<double>();
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= vps.size() || static_cast<std::size_t>(b) >= vps.size()) {
        throw DataError("world: edge endpoint out of range");
      }
      adjacency[static_cast<std::size_t>(a)].push_back({b, len});
      adjacency[static_cast<std::size_t>(b)].push_back({a, len});
    }
    return WorldGraph(config, j.at("seed").get<std::uint64_t>(), std::move(vps), std::move(adjacency),
                      j.at("landmark_embeddings").get<std::vector<std::vector<float>>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("world: malformed file: ") + e.what());
  }
}

std::string serialize_world(const WorldGraph& world) {
  nlohmann::json j = world;
  return "ASKW1\n" + j.dump() + "\n";
}

WorldGraph deserialize_world(const std::string& bytes) {
  if (bytes.rfind("ASKW1\n", 0) != 0) throw DataError("world: missing ASKW1 header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(6));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("world: body is not JSON: ") + e.what());
  }
  return world_from_json(j);
}

void save_world(const WorldGraph& world, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_world(world));
}

WorldGraph load_world(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  return deserialize_world(bytes);
}

}  // namespace askroute::world
