#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "askroute/interact.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::eval {

inline constexpr double kSuccessRadius = 3.0;

struct Metrics {
  double success_rate = 0.0;
  double mean_questions = 0.0;
  double mean_moves = 0.0;
  double ask_pct = 0.0;          // pooled: Σasks / (Σasks + Σmoves)
  double episode_ask_pct = 0.0;  // mean of per-episode ratios
  std::size_t n = 0;
};

void to_json(nlohmann::json& j, const Metrics& m);

/// asks / (asks + moves); zero when both are zero.
double ask_percentage(double asks, double moves);

/// Final viewpoint strictly within 3 m of the target.
bool is_success(const world::WorldGraph& world, const agent::InteractionTrace& trace);

Metrics aggregate(const std::vector<world::WorldGraph>& worlds, const std::vector<agent::InteractionTrace>& traces);

enum class Axis { epsilon, r_ask, noise_c, data_size };

Axis parse_axis(const std::string& name);
std::string axis_name(Axis axis);

struct SweepRow {
  Axis axis = Axis::epsilon;
  double value = 0.0;
  Metrics metrics;
};

/// Evaluates every value through `evaluate` and aggregates the traces.
std::vector<SweepRow> sweep(Axis axis, const std::vector<double>& values, const std::vector<world::WorldGraph>& worlds,
                            const std::function<std::vector<agent::InteractionTrace>(double)>& evaluate);

/// Epsilon (MC agent) or noise (`kind`) sweep over one checkpoint.
std::vector<SweepRow> sweep_checkpoint(Axis axis, const std::vector<double>& values, agent::AgentKind kind,
                                       const policy::ModelParams& params, const std::vector<world::WorldGraph>& worlds,
                                       const std::vector<data::Episode>& episodes, const agent::RunOptions& base);

/// r_ask sweep: one separately trained ASA checkpoint per value.
std::vector<SweepRow> sweep_r_ask(const std::map<double, policy::ModelParams>& checkpoints, const std::vector<double>& values,
                                  const std::vector<world::WorldGraph>& worlds, const std::vector<data::Episode>& episodes,
                                  const agent::RunOptions& options);

std::string sweep_csv_header();
std::string sweep_csv(const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);
/// (ask percentage, success rate) per row, for success-vs-asking curves.
std::vector<std::pair<double, double>> curve_points(const std::vector<SweepRow>& rows);

/// Reads a CSV written by sweep_csv.
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Static line chart as an SVG document.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

/// Markdown table of sweep rows.
std::string summary_table(const std::vector<SweepRow>& rows);

}  // namespace askroute::eval
