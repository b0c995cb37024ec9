#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace askroute::world {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr std::size_t kHeadingSectors = 12;
inline constexpr std::size_t kElevationBands = 3;
inline constexpr std::size_t kViewSlots = kHeadingSectors * kElevationBands;
/// Sin/cos of heading and elevation appended to each visual row.
inline constexpr std::size_t kAngleFeatures = 4;
inline constexpr double kSectorWidth = 2.0 * kPi / kHeadingSectors;
/// Elevation of each band; worlds are planar so only the middle band sees anything.
inline constexpr std::array<double, kElevationBands> kBandElevations{-kPi / 6.0, 0.0, kPi / 6.0};
inline constexpr std::size_t kLevelBand = 1;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Viewpoint {
  int id = 0;
  Vec3 position;
  int landmark = 0;
  friend bool operator==(const Viewpoint&, const Viewpoint&) = default;
};

struct Edge {
  int to = 0;
  double length = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

enum class Layout { grid, line };

struct WorldConfig {
  int num_viewpoints = 100;
  Layout layout = Layout::grid;
  /// Lattice spacing in meters; jitter is the half-width of the uniform
  /// perturbation applied to each coordinate.
  double spacing = 3.0;
  double jitter = 0.6;
  double min_edge = 2.0;
  double max_edge = 4.0;
  double target_degree = 3.0;
  int landmark_vocab = 24;
  /// Probability that a viewpoint copies the landmark of a sibling (another
  /// neighbour of one of its neighbours), creating look-alike choices.
  double duplicate_rate = 0.3;
  int embed_dim = 32;
  /// Seed of the landmark embedding table. Shared by every world so visual
  /// features mean the same thing everywhere.
  std::uint64_t embedding_seed = 20200207;
  int max_retries = 64;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

class WorldGraph {
 public:
  WorldGraph() = default;
  WorldGraph(WorldConfig config, std::uint64_t seed, std::vector<Viewpoint> viewpoints,
             std::vector<std::vector<Edge>> adjacency, std::vector<std::vector<float>> landmark_embeddings);

  const WorldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return viewpoints_.size(); }
  const std::vector<Viewpoint>& viewpoints() const { return viewpoints_; }
  const Viewpoint& viewpoint(int id) const;
  const Vec3& position(int id) const { return viewpoint(id).position; }
  int landmark(int id) const { return viewpoint(id).landmark; }
  /// Neighbours sorted by id.
  std::span<const Edge> neighbors(int id) const;
  bool adjacent(int a, int b) const;
  std::size_t edge_count() const;
  std::size_t embed_dim() const { return static_cast<std::size_t>(config_.embed_dim); }
  std::span<const float> embedding(int landmark) const;
  const std::vector<std::vector<float>>& landmark_embeddings() const { return embeddings_; }

  void check_id(int id) const;

  friend bool operator==(const WorldGraph& a, const WorldGraph& b) {
    return a.seed_ == b.seed_ && a.viewpoints_ == b.viewpoints_ && a.adjacency_ == b.adjacency_ &&
           a.embeddings_ == b.embeddings_;
  }

 private:
  WorldConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<Viewpoint> viewpoints_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<std::vector<float>> embeddings_;
};

/// Builds a connected world. Throws ConfigError for N < 4 and DataError when
/// no connected layout is found within the retry budget.
WorldGraph generate_world(const WorldConfig& config, std::uint64_t seed);

std::vector<std::vector<float>> make_landmark_embeddings(int vocab, int dim, std::uint64_t seed);

double distance(const WorldGraph& world, int a, int b);

/// Heading (radians, counter-clockwise from +x) of the segment a -> b.
double bearing(const WorldGraph& world, int a, int b);

/// Shortest-path distance from every viewpoint to `target` (Dijkstra).
std::vector<double> distances_to(const WorldGraph& world, int target);

/// Minimum-length path; among equal-length continuations the smallest next
/// viewpoint id wins. Throws DataError if `to` is unreachable.
std::vector<int> shortest_path(const WorldGraph& world, int from, int to);

double path_length(const WorldGraph& world, std::span<const int> path);

/// 36-slot panoramic feature. Headings are relative to the agent's facing
/// direction `heading`; row i is {vis_i, sin θ_i, cos θ_i, sin φ_i, cos φ_i}.
struct ViewFeature {
  std::size_t row_dim = 0;
  std::vector<float> rows;
  std::array<double, kViewSlots> headings{};
  std::array<double, kViewSlots> elevations{};
  /// Viewpoint shown in each slot, -1 when the slot is empty.
  std::array<int, kViewSlots> sources{};

  std::span<const float> row(std::size_t i) const { return {rows.data() + i * row_dim, row_dim}; }
};

ViewFeature view_features(const WorldGraph& world, int at, double heading = 0.0);

struct Move {
  int destination = 0;
  /// Heading toward the destination relative to the agent, in (-pi, pi].
  double heading = 0;
  std::vector<float> feature;
};

/// Candidate moves in ascending relative heading (ties by id) followed by stop.
struct ActionSet {
  std::vector<Move> moves;
  std::size_t feature_dim = 0;

  std::size_t size() const { return moves.size() + 1; }
  std::size_t stop_index() const { return moves.size(); }
  bool is_stop(std::size_t index) const { return index == moves.size(); }
  /// Index of the move to `destination`, or npos.
  std::size_t index_of(int destination) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

ActionSet navigable_actions(const WorldGraph& world, int at, double heading = 0.0);

/// Feature row for a move: destination landmark embedding plus angles.
std::vector<float> move_feature(const WorldGraph& world, int destination, double relative_heading);

void to_json(nlohmann::json& j, const WorldGraph& w);
WorldGraph world_from_json(const nlohmann::json& j);

/// "ASKW1" followed by a newline and the JSON body.
std::string serialize_world(const WorldGraph& world);
WorldGraph deserialize_world(const std::string& bytes);
void save_world(const WorldGraph& world, const std::filesystem::path& path);
WorldGraph load_world(const std::filesystem::path& path);

}  // namespace askroute::world
