#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "askroute/world.hpp"

namespace fixtures {

using askroute::world::Edge;
using askroute::world::Vec3;
using askroute::world::Viewpoint;
using askroute::world::WorldConfig;
using askroute::world::WorldGraph;

/// Hand-built world: edge lengths are the Euclidean distances of `positions`.
inline WorldGraph make_world(const std::vector<Vec3>& positions, const std::vector<std::pair<int, int>>& edges,
                             std::vector<int> landmarks = {}, int embed_dim = 4) {
  WorldConfig config;
  config.num_viewpoints = static_cast<int>(positions.size());
  config.embed_dim = embed_dim;
  config.landmark_vocab = 8;
  if (landmarks.empty())
    for (std::size_t i = 0; i < positions.size(); ++i) landmarks.push_back(static_cast<int>(i % 8));
  std::vector<Viewpoint> vps;
  for (std::size_t i = 0; i < positions.size(); ++i) vps.push_back({static_cast<int>(i), positions[i], landmarks[i]});
  std::vector<std::vector<Edge>> adj(positions.size());
  for (auto [a, b] : edges) {
    const auto& p = positions[static_cast<std::size_t>(a)];
    const auto& q = positions[static_cast<std::size_t>(b)];
    const double len = std::hypot(p.x - q.x, p.y - q.y, p.z - q.z);
    adj[static_cast<std::size_t>(a)].push_back({b, len});
    adj[static_cast<std::size_t>(b)].push_back({a, len});
  }
  for (auto& list : adj) std::sort(list.begin(), list.end(), [](const Edge& x, const Edge& y) { return x.to < y.to; });
  auto emb = askroute::world::make_landmark_embeddings(config.landmark_vocab, embed_dim, 99);
  return WorldGraph(config, 0, std::move(vps), std::move(adj), std::move(emb));
}

/// Straight line along +x with 3 m spacing.
inline WorldGraph line_world(int n) {
  std::vector<Vec3> pos;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    pos.push_back({3.0 * i, 0.0, 0.0});
    if (i > 0) edges.emplace_back(i - 1, i);
  }
  return make_world(pos, edges);
}

/// Centre 0 with neighbours 1 (east), 2 (north-east), 3 (west).
inline WorldGraph star_world() {
  const double r = 3.0;
  return make_world({{0, 0, 0}, {r, 0, 0}, {r * std::cos(M_PI / 4), r * std::sin(M_PI / 4), 0}, {-r, 0, 0}},
                    {{0, 1}, {0, 2}, {0, 3}});
}

}  // namespace fixtures
