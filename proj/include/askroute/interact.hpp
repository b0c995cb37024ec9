#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "askroute/episode.hpp"
#include "askroute/navpolicy.hpp"
#include "askroute/oracle.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::agent {

enum class AgentKind { base, mc, asa };

AgentKind parse_agent(const std::string& name);
std::string agent_name(AgentKind kind);

struct RunOptions {
  int max_steps = 20;
  double epsilon = 0.3;
  oracle::OracleConfig oracle;
  /// Answers only inform the decoder; the agent re-decides after each ask.
  bool free_ask = false;
  int max_consecutive_asks = 3;
};

void to_json(nlohmann::json& j, const RunOptions& o);
void from_json(const nlohmann::json& j, RunOptions& o);

struct TraceStep {
  int viewpoint = 0;
  double heading = 0.0;
  std::vector<double> probs;
  std::size_t chosen = 0;  // the agent's own pick; the ask index when it asked
  bool is_ask = false;
  std::optional<oracle::OracleAnswer> answer;
  std::optional<std::size_t> executed;  // action carried out, absent for a free ask
  int destination = 0;                  // viewpoint after the step
};

struct InteractionTrace {
  static constexpr int kSchema = 1;
  data::Episode episode;
  std::string agent;
  std::vector<TraceStep> steps;
  std::vector<int> visited;  // start, then every viewpoint moved to
  int final_viewpoint = 0;
  int asks = 0;
  int moves = 0;  // executed decisions, stop included
  bool truncated = false;
};

void to_json(nlohmann::json& j, const TraceStep& s);
void from_json(const nlohmann::json& j, TraceStep& s);
void to_json(nlohmann::json& j, const InteractionTrace& t);
void from_json(const nlohmann::json& j, InteractionTrace& t);

/// Answers an ask: given the current position and actions, the index to
/// execute. The simulated oracle and a human at a terminal both fit.
using AnswerSource = std::function<oracle::OracleAnswer(int current, const world::ActionSet& actions)>;

/// Observer for each decision, used by the text-mode session.
using StepObserver = std::function<void(const world::WorldGraph&, const TraceStep&, const world::ActionSet&)>;

InteractionTrace run_base(const policy::ModelParams& params, const world::WorldGraph& world, const data::Episode& episode,
                          int max_steps);
InteractionTrace run_mc(const policy::ModelParams& params, const world::WorldGraph& world, const data::Episode& episode,
                        const RunOptions& options);
InteractionTrace run_asa(const policy::ModelParams& params, const world::WorldGraph& world, const data::Episode& episode,
                         const RunOptions& options);

/// General runner behind the three above; `answers` replaces the simulated
/// oracle when set.
InteractionTrace run_agent(AgentKind kind, const policy::ModelParams& params, const world::WorldGraph& world,
                           const data::Episode& episode, const RunOptions& options, const AnswerSource& answers = {},
                           const StepObserver& observer = {});

/// Runs every episode, in parallel across ASKROUTE_THREADS workers; the
/// result order matches `episodes`.
std::vector<InteractionTrace> run_all(AgentKind kind, const policy::ModelParams& params,
                                      const std::vector<world::WorldGraph>& worlds,
                                      const std::vector<data::Episode>& episodes, const RunOptions& options);

void save_traces(const std::vector<InteractionTrace>& traces, const std::filesystem::path& path);
std::vector<InteractionTrace> load_traces(const std::filesystem::path& path);

}  // namespace askroute::agent
