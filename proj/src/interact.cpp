#include "askroute/interact.hpp"

#include <algorithm>
#include <sstream>

#include "askroute/errors.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/jsonutil.hpp"
#include "askroute/parallel.hpp"

namespace askroute::agent {

AgentKind parse_agent(const std::string& name) {
  if (name == "base") return AgentKind::base;
  if (name == "mc") return AgentKind::mc;
  if (name == "asa") return AgentKind::asa;
  throw ConfigError("unknown agent '" + name + "' (expected base, mc or asa)");
}

std::string agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::base: return "base";
    case AgentKind::mc: return "mc";
    case AgentKind::asa: return "asa";
  }
  return "?";
}

void to_json(nlohmann::json& j, const RunOptions& o) {
  j = {{"max_steps", o.max_steps},
       {"epsilon", o.epsilon},
       {"oracle", o.oracle},
       {"free_ask", o.free_ask},
       {"max_consecutive_asks", o.max_consecutive_asks}};
}

void from_json(const nlohmann::json& j, RunOptions& o) {
  constexpr std::string_view what = "eval config";
  reject_unknown_keys(j, {"max_steps", "epsilon", "oracle", "free_ask", "max_consecutive_asks"}, what);
  read_optional(j, "max_steps", o.max_steps, what);
  read_optional(j, "epsilon", o.epsilon, what);
  if (j.contains("oracle")) o.oracle = j.at("oracle").get<oracle::OracleConfig>();
  read_optional(j, "free_ask", o.free_ask, what);
  read_optional(j, "max_consecutive_asks", o.max_consecutive_asks, what);
}

void to_json(nlohmann::json& j, const TraceStep& s) {
  j = {{"viewpoint", s.viewpoint}, {"heading", s.heading}, {"probs", s.probs}, {"chosen", s.chosen},
       {"is_ask", s.is_ask},       {"destination", s.destination}};
  j["answer"] = s.answer ? nlohmann::json(*s.answer) : nlohmann::json(nullptr);
  j["executed"] = s.executed ? nlohmann::json(*s.executed) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TraceStep& s) {
  s.viewpoint = j.at("viewpoint").get<int>();
  s.heading = j.at("heading").get<double>();
  s.probs = j.at("probs").get<std::vector<double>>();
  s.chosen = j.at("chosen").get<std::size_t>();
  s.is_ask = j.at("is_ask").get<bool>();
  s.destination = j.at("destination").get<int>();
  s.answer.reset();
  s.executed.reset();
  if (!j.at("answer").is_null()) s.answer = j.at("answer").get<oracle::OracleAnswer>();
  if (!j.at("executed").is_null()) s.executed = j.at("executed").get<std::size_t>();
}

void to_json(nlohmann::json& j, const InteractionTrace& t) {
  j = {{"schema", InteractionTrace::kSchema},
       {"episode", t.episode},
       {"agent", t.agent},
       {"steps", t.steps},
       {"visited", t.visited},
       {"final_viewpoint", t.final_viewpoint},
       {"asks", t.asks},
       {"moves", t.moves},
       {"truncated", t.truncated}};
}

void from_json(const nlohmann::json& j, InteractionTrace& t) {
  if (j.at("schema").get<int>() != InteractionTrace::kSchema) throw DataError("trace: unsupported schema version");
  t.episode = j.at("episode").get<data::Episode>();
  t.agent = j.at("agent").get<std::string>();
  t.steps = j.at("steps").get<std::vector<TraceStep>>();
  t.visited = j.at("visited").get<std::vector<int>>();
  t.final_viewpoint = j.at("final_viewpoint").get<int>();
  t.asks = j.at("asks").get<int>();
  t.moves = j.at("moves").get<int>();
  t.truncated = j.at("truncated").get<bool>();
}

namespace {

/// Index of the largest probability among the first `count`, lowest on ties.
std::size_t argmax_prefix(const std::vector<double>& p, std::size_t count) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < count; ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

bool confused(const std::vector<double>& p, std::size_t count, double epsilon) {
  if (count < 2) return false;
  std::vector<double> sorted(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(count));
  std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
  return sorted[0] - sorted[1] < epsilon;
}

}  // namespace

InteractionTrace run_agent(AgentKind kind, const policy::ModelParams& params, const world::WorldGraph& w,
                           const data::Episode& episode, const RunOptions& options, const AnswerSource& answers,
                           const StepObserver& observer) {
  if (kind == AgentKind::asa && !params.config.ask_enabled) {
    throw ConfigError("run_asa: checkpoint has the ask action disabled");
  }
  if (kind != AgentKind::asa && params.config.ask_enabled) {
    throw ConfigError("run_" + agent_name(kind) + ": checkpoint has the ask action enabled; use the asa agent");
  }
  if (kind == AgentKind::mc && !(options.epsilon > 0.0 && options.epsilon < 1.0)) {
    throw ConfigError("run_mc: epsilon must lie in (0,1)");
  }
  if (options.max_steps < 1) throw ConfigError("run: max_steps must be positive");
  oracle::validate(options.oracle);

  Rng stream = oracle::episode_stream(options.oracle, episode.seed);
  AnswerSource ask = answers;
  if (!ask) {
    ask = [&](int current, const world::ActionSet& actions) {
      return oracle::respond(w, current, episode.target, actions, options.oracle, stream);
    };
  }

  InteractionTrace trace;
  trace.episode = episode;
  trace.agent = agent_name(kind);
  trace.visited.push_back(episode.start);

  diff::Tape<float> tape;
  policy::Policy<float> net(tape, params);
  const auto enc = net.encode(episode.instruction.token_ids);
  auto state = net.initial_state();
  int at = episode.start;
  double heading = 0.0;
  int consecutive_asks = 0;
  bool stopped = false;

  for (int t = 0; t < options.max_steps && !stopped; ++t) {
    const auto view = world::view_features(w, at, heading);
    const auto actions = world::navigable_actions(w, at, heading);
    const auto out = net.step(enc, view, actions, state);
    TraceStep step;
    step.viewpoint = at;
    step.heading = heading;
    const auto pv = out.probs.value();
    step.probs.assign(pv.begin(), pv.end());

    const std::size_t m = actions.size();
    bool wants_ask = false;
    switch (kind) {
      case AgentKind::base:
        step.chosen = argmax_prefix(step.probs, m);
        break;
      case AgentKind::mc:
        step.chosen = argmax_prefix(step.probs, m);
        wants_ask = confused(step.probs, m, options.epsilon);
        break;
      case AgentKind::asa: {
        const bool ask_allowed = !options.free_ask || consecutive_asks < options.max_consecutive_asks;
        step.chosen = argmax_prefix(step.probs, ask_allowed ? m + 1 : m);
        wants_ask = step.chosen == m;
        break;
      }
    }

    std::size_t executed = step.chosen;
    if (wants_ask) {
      step.is_ask = true;
      if (kind == AgentKind::mc) step.chosen = m;
      step.answer = ask(at, actions);
      if (step.answer->action_index >= m) throw std::out_of_range("answer index outside the action set");
      executed = step.answer->action_index;
      ++trace.asks;
      ++consecutive_asks;
      if (options.free_ask && kind == AgentKind::asa) {
        state = net.advance(out.state, actions, executed);
        step.destination = at;
        if (observer) observer(w, step, actions);
        trace.steps.push_back(std::move(step));
        continue;
      }
    } else {
      consecutive_asks = 0;
    }

    step.executed = executed;
    ++trace.moves;
    state = net.advance(out.state, actions, executed);
    if (actions.is_stop(executed)) {
      stopped = true;
      step.destination = at;
    } else {
      const int next = actions.moves[executed].destination;
      heading = world::bearing(w, at, next);
      at = next;
      step.destination = at;
      trace.visited.push_back(at);
    }
    if (observer) observer(w, step, actions);
    trace.steps.push_back(std::move(step));
  }
  trace.final_viewpoint = at;
  trace.truncated = !stopped;
  return trace;
}

InteractionTrace run_base(const policy::ModelParams& params, const world::WorldGraph& w, const data::Episode& episode,
                          int max_steps) {
  RunOptions options;
  options.max_steps = max_steps;
  return run_agent(AgentKind::base, params, w, episode, options);
}

InteractionTrace run_mc(const policy::ModelParams& params, const world::WorldGraph& w, const data::Episode& episode,
                        const RunOptions& options) {
  return run_agent(AgentKind::mc, params, w, episode, options);
}

InteractionTrace run_asa(const policy::ModelParams& params, const world::WorldGraph& w, const data::Episode& episode,
                         const RunOptions& options) {
  return run_agent(AgentKind::asa, params, w, episode, options);
}

std::vector<InteractionTrace> run_all(AgentKind kind, const policy::ModelParams& params,
                                      const std::vector<world::WorldGraph>& worlds,
                                      const std::vector<data::Episode>& episodes, const RunOptions& options) {
  std::vector<InteractionTrace> traces(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) {
    const auto& e = episodes[i];
    traces[i] = run_agent(kind, params, worlds.at(static_cast<std::size_t>(e.world)), e, options);
  });
  return traces;
}

void save_traces(const std::vector<InteractionTrace>& traces, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : traces) {
    out += nlohmann::json(t).dump();
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

std::vector<InteractionTrace> load_traces(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<InteractionTrace> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<InteractionTrace>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace askroute::agent
