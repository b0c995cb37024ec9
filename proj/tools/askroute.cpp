// askroute: command-line front end for the navigation lab.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "askroute/augment.hpp"
#include "askroute/diff/optim.hpp"
#include "askroute/episode.hpp"
#include "askroute/errors.hpp"
#include "askroute/evalkit.hpp"
#include "askroute/interact.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/jsonutil.hpp"
#include "askroute/langgen.hpp"
#include "askroute/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace askroute;

namespace {

struct EvalSection {
  std::string split = "val_unseen";
  int limit = 0;  // 0 keeps every episode
  agent::RunOptions run;
};

struct AugmentSection {
  std::string split_mode = "disjoint";
  std::string agent = "asa";
  augment::FinetuneConfig finetune;
  std::vector<int> sizes{0, 100, 200, 300, 400};
};

struct RunConfig {
  std::uint64_t seed = 1;
  data::BenchmarkConfig benchmark;
  train::TrainConfig train;
  EvalSection eval;
  AugmentSection augment;
};

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"benchmark", c.benchmark},
          {"train", c.train},
          {"eval", {{"split", c.eval.split}, {"limit", c.eval.limit}, {"run", c.eval.run}}},
          {"augment",
           {{"split_mode", c.augment.split_mode},
            {"agent", c.augment.agent},
            {"finetune", c.augment.finetune},
            {"sizes", c.augment.sizes}}}};
}

template <typename T>
T patched(const T& base, const json& patch) {
  json j = base;
  j.merge_patch(patch);
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig c;
  json j = json::object();
  if (!path.empty()) {
    try {
      j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }
  reject_unknown_keys(j, {"seed", "benchmark", "train", "eval", "augment"}, "config");
  read_optional(j, "seed", c.seed, "config");
  if (seed) c.seed = *seed;
  c.benchmark.seed = c.seed;
  c.train.seed = c.seed;
  c.eval.run.oracle.seed = c.seed;
  c.augment.finetune.train.seed = c.seed;
  c.train.model.vocab_size = static_cast<int>(lang::vocabulary().size());
  c.augment.finetune.train.model = c.train.model;

  if (j.contains("benchmark")) c.benchmark = patched(c.benchmark, j["benchmark"]);
  if (j.contains("train")) c.train = patched(c.train, j["train"]);
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown_keys(e, {"split", "limit", "run"}, "eval");
    read_optional(e, "split", c.eval.split, "eval");
    read_optional(e, "limit", c.eval.limit, "eval");
    if (e.contains("run")) c.eval.run = patched(c.eval.run, e["run"]);
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    reject_unknown_keys(a, {"split_mode", "agent", "finetune", "sizes"}, "augment");
    read_optional(a, "split_mode", c.augment.split_mode, "augment");
    read_optional(a, "agent", c.augment.agent, "augment");
    read_optional(a, "sizes", c.augment.sizes, "augment");
    if (a.contains("finetune")) c.augment.finetune = patched(c.augment.finetune, a["finetune"]);
  }
  train::validate(c.train);
  oracle::validate(c.eval.run.oracle);
  augment::parse_split_mode(c.augment.split_mode);
  agent::parse_agent(c.augment.agent);
  return c;
}

void write_resolved(const fs::path& out_dir, const std::string& command, const RunConfig& c, const json& args) {
  fs::create_directories(out_dir);
  json j = {{"command", command}, {"args", args}, {"config", to_json(c)}};
  io::write_file_atomic(out_dir / "config.json", j.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, text);
}

const std::vector<data::Episode>& split_of(const data::Benchmark& b, const std::string& name) {
  if (name == "train") return b.train;
  if (name == "val_seen") return b.val_seen;
  if (name == "val_unseen") return b.val_unseen;
  throw ConfigError("unknown split '" + name + "' (train, val_seen, val_unseen)");
}

std::vector<data::Episode> eval_episodes(const data::Benchmark& b, const EvalSection& e) {
  auto eps = split_of(b, e.split);
  if (e.limit > 0 && static_cast<std::size_t>(e.limit) < eps.size()) eps.resize(static_cast<std::size_t>(e.limit));
  return eps;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      throw ConfigError("bad number '" + cell + "' in --values");
    }
  }
  if (out.empty()) throw ConfigError("--values is empty");
  return out;
}

std::vector<int> unseen_world_indices(const data::Benchmark& b) {
  std::vector<int> out;
  for (int i = b.config.train_worlds; i < b.config.train_worlds + b.config.unseen_worlds; ++i) out.push_back(i);
  return out;
}

// Relative heading rendered as one of eight compass-like sectors.
std::string sector_name(double relative) {
  static const char* names[] = {"ahead", "ahead-left", "left", "behind-left", "behind", "behind-right", "right",
                                "ahead-right"};
  const double step = world::kPi / 4.0;
  int k = static_cast<int>(std::floor((world::wrap_angle(relative) + step / 2.0) / step));
  k = ((k % 8) + 8) % 8;
  return names[k];
}

std::string landmark_name(const world::WorldGraph& w, int viewpoint) {
  const auto& vocab = lang::vocabulary();
  return vocab.token(vocab.landmark_token(w.landmark(viewpoint)));
}

void describe_view(std::ostream& out, const world::WorldGraph& w, int at, const world::ActionSet& actions) {
  out << "You are at viewpoint " << at << " (" << landmark_name(w, at) << ").\n";
  std::map<std::string, std::vector<std::string>> sectors;
  for (const auto& m : actions.moves) sectors[sector_name(m.heading)].push_back(landmark_name(w, m.destination));
  for (const auto& [sector, marks] : sectors) {
    out << "  " << sector << ":";
    for (const auto& s : marks) out << " " << s;
    out << "\n";
  }
  for (std::size_t i = 0; i < actions.moves.size(); ++i) {
    const auto& m = actions.moves[i];
    char deg[32];
    std::snprintf(deg, sizeof deg, "%+.0f", m.heading * 180.0 / world::kPi);
    out << "  [" << i << "] go " << sector_name(m.heading) << " (" << deg << " deg) to the " << landmark_name(w, m.destination)
        << "\n";
  }
  out << "  [" << actions.stop_index() << "] stop here\n";
}

int cmd_gen_world(const RunConfig& c, const fs::path& out) {
  auto w = world::generate_world(c.benchmark.world, c.seed);
  world::save_world(w, out);
  write_resolved(out.has_parent_path() ? out.parent_path() : fs::path("."), "gen-world", c, {{"out", out.string()}});
  std::cout << "world: " << w.size() << " viewpoints, " << w.edge_count() << " edges -> " << out.string() << "\n";
  return 0;
}

int cmd_gen_data(const RunConfig& c, const fs::path& out) {
  auto b = data::build_benchmark(c.benchmark);
  data::save_benchmark(b, out);
  write_resolved(out, "gen-data", c, {{"out", out.string()}});
  std::cout << "benchmark: " << b.worlds.size() << " worlds, " << b.train.size() << " train, " << b.val_seen.size()
            << " val_seen, " << b.val_unseen.size() << " val_unseen -> " << out.string() << "\n";
  return 0;
}

int cmd_train(RunConfig c, const fs::path& data_dir, const std::string& agent_name, const std::string& init,
              std::optional<double> r_ask, std::optional<int> iterations, bool resume, const fs::path& out) {
  const auto kind = agent::parse_agent(agent_name);
  if (kind == agent::AgentKind::mc) throw ConfigError("train: mc is a test-time strategy; train a base model");
  c.train.ask_enabled = kind == agent::AgentKind::asa;
  if (r_ask) c.train.r_ask = *r_ask;
  if (iterations) c.train.iterations = *iterations;
  train::validate(c.train);
  const auto b = data::load_benchmark(data_dir);
  write_resolved(out, "train", c,
                 {{"data", data_dir.string()}, {"agent", agent_name}, {"init", init}, {"resume", resume}});

  train::TrainerState state;
  if (resume && fs::exists(out / "state.askc")) {
    state = train::load_state(c.train, out / "state.askc");
    std::cout << "resuming at iteration " << state.iteration << "\n";
  } else {
    auto params = init.empty() ? policy::init_params(c.train.model, c.seed) : policy::load_model(init);
    if (params.config.vocab_size != c.train.model.vocab_size) throw ConfigError("train: checkpoint vocabulary mismatch");
    state = train::make_state(c.train, std::move(params));
  }

  std::vector<data::Episode> val(b.val_seen.begin(),
                                 b.val_seen.begin() + std::min<std::ptrdiff_t>(c.train.val_episodes,
                                                                               static_cast<std::ptrdiff_t>(b.val_seen.size())));
  train::TrainCallbacks cb;
  cb.validate = [&](const policy::ModelParams& p) {
    auto m = eval::aggregate(b.worlds, agent::run_all(kind, p, b.worlds, val, c.eval.run));
    std::cout << "iter " << state.iteration << " val_sr " << m.success_rate << " asks " << m.mean_questions << std::endl;
    return std::make_pair(m.success_rate, m.mean_questions);
  };
  train::train(state, c.train, b.worlds, b.train, cb, out);
  std::cout << "model -> " << (out / "model.askc").string() << "\n";
  return 0;
}

int cmd_run(RunConfig c, const fs::path& data_dir, const std::string& checkpoint, const std::string& agent_name,
            const fs::path& out) {
  const auto kind = agent::parse_agent(agent_name);
  const auto b = data::load_benchmark(data_dir);
  const auto params = policy::load_model(checkpoint);
  write_resolved(out, "run", c, {{"data", data_dir.string()}, {"checkpoint", checkpoint}, {"agent", agent_name}});
  const auto traces = agent::run_all(kind, params, b.worlds, eval_episodes(b, c.eval), c.eval.run);
  agent::save_traces(traces, out / "traces.jsonl");
  const auto m = eval::aggregate(b.worlds, traces);
  write_text(out / "metrics.json", json(m).dump(2) + "\n");
  std::cout << "success_rate " << m.success_rate << " mean_questions " << m.mean_questions << " mean_moves "
            << m.mean_moves << " ask_pct " << m.ask_pct << " n " << m.n << "\n";
  return 0;
}

int cmd_sweep(RunConfig c, const fs::path& data_dir, const std::vector<std::string>& checkpoints,
              const std::string& agent_name, const std::string& axis_name, const std::string& values_csv,
              const fs::path& out) {
  const auto axis = eval::parse_axis(axis_name);
  const auto kind = agent::parse_agent(agent_name);
  const auto values = parse_values(values_csv);
  const auto b = data::load_benchmark(data_dir);
  const auto episodes = eval_episodes(b, c.eval);
  write_resolved(out, "sweep", c,
                 {{"data", data_dir.string()}, {"checkpoints", checkpoints}, {"agent", agent_name}, {"axis", axis_name},
                  {"values", values}});

  std::vector<eval::SweepRow> rows;
  if (axis == eval::Axis::r_ask) {
    if (checkpoints.size() != values.size()) {
      throw ConfigError("sweep: the r_ask axis needs one --checkpoint per value (" + std::to_string(values.size()) +
                        " values, " + std::to_string(checkpoints.size()) + " checkpoints)");
    }
    std::map<double, policy::ModelParams> by_value;
    for (std::size_t i = 0; i < values.size(); ++i) by_value[values[i]] = policy::load_model(checkpoints[i]);
    rows = eval::sweep_r_ask(by_value, values, b.worlds, episodes, c.eval.run);
  } else if (axis == eval::Axis::data_size) {
    throw ConfigError("sweep: the data_size axis is produced by the curve command");
  } else {
    if (checkpoints.size() != 1) throw ConfigError("sweep: this axis takes exactly one --checkpoint");
    rows = eval::sweep_checkpoint(axis, values, kind, policy::load_model(checkpoints[0]), b.worlds, episodes, c.eval.run);
  }
  write_text(out / "sweep.csv", eval::sweep_csv(rows));
  write_text(out / "sweep.json", eval::sweep_json(rows).dump(2) + "\n");
  std::cout << eval::sweep_csv(rows);
  return 0;
}

int cmd_augment(RunConfig c, const fs::path& data_dir, const std::string& checkpoint, const std::string& interact_checkpoint,
                const fs::path& out) {
  const auto kind = agent::parse_agent(c.augment.agent);
  if (kind == agent::AgentKind::base) throw ConfigError("augment: the interacting agent must be mc or asa");
  const auto b = data::load_benchmark(data_dir);
  const auto base = policy::load_model(checkpoint);
  const auto teacher = interact_checkpoint.empty() ? base : policy::load_model(interact_checkpoint);
  write_resolved(out, "augment", c,
                 {{"data", data_dir.string()}, {"checkpoint", checkpoint}, {"interact_checkpoint", interact_checkpoint}});

  const auto sp = augment::split(b.val_unseen, augment::parse_split_mode(c.augment.split_mode), derive_seed(c.seed, 0xa5));
  data::save_episodes(sp.t_a, out / "t_a.jsonl");
  data::save_episodes(sp.t_b, out / "t_b.jsonl");
  const auto items = augment::collect_interactions(kind, teacher, b.worlds, sp.t_a, c.eval.run);
  augment::save_items(items, out / "human.jsonl");

  const auto tuned = augment::finetune(base, b.worlds, items, c.augment.finetune);
  policy::save_model(tuned, out / "finetuned.askc");

  agent::RunOptions plain = c.eval.run;
  auto sr = [&](const policy::ModelParams& p) {
    return eval::aggregate(b.worlds, agent::run_all(agent::AgentKind::base, p, b.worlds, sp.t_b, plain)).success_rate;
  };
  std::size_t reached = 0;
  for (const auto& item : items)
    reached += world::distance(b.worlds.at(static_cast<std::size_t>(item.world)), item.trajectory.back(),
                               sp.t_a[&item - items.data()].target) < eval::kSuccessRadius;
  const json report = {{"t_a", sp.t_a.size()},
                       {"t_b", sp.t_b.size()},
                       {"collected_sr", static_cast<double>(reached) / static_cast<double>(items.size())},
                       {"base_sr", sr(base)},
                       {"finetuned_sr", sr(tuned)}};
  write_text(out / "metrics.json", report.dump(2) + "\n");
  std::cout << report.dump() << "\n";
  return 0;
}

int cmd_curve(RunConfig c, const fs::path& data_dir, const std::string& checkpoint, const fs::path& items_path,
              const fs::path& t_b_path, const fs::path& out) {
  const auto b = data::load_benchmark(data_dir);
  const auto base = policy::load_model(checkpoint);
  const auto human = augment::load_items(items_path);
  const auto t_b = data::load_episodes(t_b_path);
  data::check_episodes(b.worlds, t_b);
  int largest = 1;
  for (int s : c.augment.sizes) largest = std::max(largest, s);
  write_resolved(out, "curve", c,
                 {{"data", data_dir.string()}, {"checkpoint", checkpoint}, {"items", items_path.string()},
                  {"t_b", t_b_path.string()}});
  const auto preexp = augment::pre_exploration_data(b.worlds, unseen_world_indices(b), largest,
                                                    derive_seed(c.seed, 0x9e), b.config.lengths);
  augment::save_items(preexp, out / "preexp.jsonl");
  const auto points = augment::data_efficiency_curve(base, b.worlds, human, preexp, t_b, c.augment.sizes,
                                                     c.augment.finetune, c.eval.run.max_steps);
  write_text(out / "curve.csv", augment::curve_csv(points));
  std::cout << augment::curve_csv(points);
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const fs::path& out) {
  fs::create_directories(out);
  std::string summary = "# Report\n";
  std::map<std::string, int> stem_count;
  for (const auto& in : inputs) ++stem_count[fs::path(in).stem().string()];
  for (const auto& in : inputs) {
    const fs::path p(in);
    // Inputs sharing a file name (every sweep writes sweep.csv) are named by their directory.
    std::string stem = p.stem().string();
    if (stem_count[stem] > 1 && p.has_parent_path()) stem = p.parent_path().filename().string() + "_" + stem;
    const std::string head = io::read_file(p).substr(0, io::read_file(p).find('\n'));
    if (head == eval::sweep_csv_header()) {
      const auto rows = eval::read_sweep_csv(p);
      eval::Series sr{"success rate", {}}, q{"questions / episode", {}};
      for (const auto& r : rows) {
        sr.points.emplace_back(r.value, r.metrics.success_rate);
        q.points.emplace_back(r.value, r.metrics.mean_questions);
      }
      const std::string axis = rows.empty() ? "value" : eval::axis_name(rows.front().axis);
      write_text(out / (stem + ".svg"), eval::render_svg(stem, axis, "value", {sr, q}));
      write_text(out / (stem + "_curve.svg"),
                 eval::render_svg(stem + ": success vs asking", "ask percentage", "success rate",
                                  {{stem, eval::curve_points(rows)}}));
      summary += "\n## " + stem + "\n\n" + eval::summary_table(rows);
    } else if (head == "size,human_sr,preexp_sr") {
      const auto points = augment::read_curve_csv(p);
      eval::Series human{"human-guided", {}}, pre{"pre-exploration", {}};
      for (const auto& pt : points) {
        human.points.emplace_back(pt.size, pt.human_sr);
        pre.points.emplace_back(pt.size, pt.preexp_sr);
      }
      write_text(out / (stem + ".svg"), eval::render_svg(stem, "augmented items", "success rate on T_b", {human, pre}));
      summary += "\n## " + stem + "\n\n| size | human-guided | pre-exploration |\n|---|---|---|\n";
      char buf[128];
      for (const auto& pt : points) {
        std::snprintf(buf, sizeof buf, "| %d | %.3f | %.3f |\n", pt.size, pt.human_sr, pt.preexp_sr);
        summary += buf;
      }
    } else {
      throw DataError(in + ": neither a sweep CSV nor a curve CSV");
    }
  }
  write_text(out / "summary.md", summary);
  std::cout << summary;
  return 0;
}

int cmd_interactive(RunConfig c, const fs::path& data_dir, const std::string& checkpoint, const std::string& agent_name,
                    int episode_index, const fs::path& out) {
  const auto kind = agent::parse_agent(agent_name);
  const auto b = data::load_benchmark(data_dir);
  const auto params = policy::load_model(checkpoint);
  const auto& eps = split_of(b, c.eval.split);
  if (episode_index < 0 || static_cast<std::size_t>(episode_index) >= eps.size()) {
    throw ConfigError("interactive: episode " + std::to_string(episode_index) + " out of range");
  }
  const auto& episode = eps[static_cast<std::size_t>(episode_index)];
  const auto& w = b.world_of(episode);

  std::cout << "Instruction: " << lang::render(episode.instruction) << "\n";
  auto answer = [&](int current, const world::ActionSet& actions) {
    std::cout << "\nAgent: I am lost, please help me!\n";
    describe_view(std::cout, w, current, actions);
    for (;;) {
      std::cout << "Your answer> " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line)) throw DataError("interactive: input ended before the episode finished");
      try {
        std::size_t used = 0;
        const long v = std::stol(line, &used);
        if (v >= 0 && static_cast<std::size_t>(v) < actions.size()) {
          const auto idx = static_cast<std::size_t>(v);
          const auto truth = oracle::teacher_action(w, current, episode.target, actions);
          return oracle::OracleAnswer{idx, idx != truth, truth};
        }
      } catch (const std::logic_error&) {
      }
      std::cout << "Please enter a number between 0 and " << actions.size() - 1 << ".\n";
    }
  };
  auto observe = [&](const world::WorldGraph& world, const agent::TraceStep& s, const world::ActionSet& actions) {
    if (s.is_ask) return;
    if (actions.is_stop(s.chosen)) std::cout << "Agent stops at viewpoint " << s.viewpoint << ".\n";
    else std::cout << "Agent moves to viewpoint " << s.destination << " (" << landmark_name(world, s.destination) << ").\n";
  };
  const auto trace = agent::run_agent(kind, params, w, episode, c.eval.run, answer, observe);
  const bool ok = world::distance(w, trace.final_viewpoint, episode.target) < eval::kSuccessRadius;
  std::cout << (ok ? "Success" : "Failure") << ": " << trace.asks << " questions, " << trace.moves << " moves.\n";
  agent::save_traces({trace}, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive instruction-following navigation lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "global seed");

  std::string data_dir, checkpoint, agent = "base", out, init, interact_checkpoint, axis, values, items, t_b;
  std::string split_mode, finetune_mode, world_path;
  std::vector<std::string> checkpoints, inputs;
  std::optional<double> epsilon, noise_c, r_ask;
  std::optional<int> iterations, limit;
  std::optional<std::string> split;
  bool resume = false;
  int episode_index = 0;

  auto* gen_world = app.add_subcommand("gen-world", "generate one world file");
  gen_world->add_option("--out,--world", world_path, "output .askw path")->required();

  auto* gen_data = app.add_subcommand("gen-data", "generate worlds and episode splits");
  gen_data->add_option("--out", out, "output directory")->required();

  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--epsilon", epsilon, "MC margin");
    sub->add_option("--noise-c", noise_c, "oracle distortion probability");
    sub->add_option("--split", split, "train, val_seen or val_unseen");
    sub->add_option("--limit", limit, "evaluate only the first N episodes");
  };

  auto* train_cmd = app.add_subcommand("train", "train a base or ASA model");
  train_cmd->add_option("--data", data_dir)->required();
  train_cmd->add_option("--agent", agent, "base or asa");
  train_cmd->add_option("--init", init, "start from this checkpoint");
  train_cmd->add_option("--r-ask", r_ask, "ask penalty");
  train_cmd->add_option("--iterations", iterations);
  train_cmd->add_flag("--resume", resume, "continue from <out>/state.askc");
  train_cmd->add_option("--out", out)->required();
  add_eval(train_cmd);

  auto* run_cmd = app.add_subcommand("run", "evaluate a checkpoint");
  run_cmd->add_option("--data", data_dir)->required();
  run_cmd->add_option("--checkpoint", checkpoint)->required();
  run_cmd->add_option("--agent", agent, "base, mc or asa");
  run_cmd->add_option("--out", out)->required();
  add_eval(run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate along one axis");
  sweep_cmd->add_option("--data", data_dir)->required();
  sweep_cmd->add_option("--checkpoint", checkpoints, "one checkpoint, or one per r_ask value")->required();
  sweep_cmd->add_option("--agent", agent, "base, mc or asa");
  sweep_cmd->add_option("--axis", axis, "epsilon, r_ask or noise_c")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out)->required();
  add_eval(sweep_cmd);

  auto* augment_cmd = app.add_subcommand("augment", "collect guided trajectories and fine-tune");
  augment_cmd->add_option("--data", data_dir)->required();
  augment_cmd->add_option("--checkpoint", checkpoint, "base model to fine-tune")->required();
  augment_cmd->add_option("--interact-checkpoint", interact_checkpoint, "model that interacts (default: base)");
  augment_cmd->add_option("--agent", agent, "mc or asa");
  augment_cmd->add_option("--split-mode", split_mode, "disjoint or random");
  augment_cmd->add_option("--finetune-mode", finetune_mode, "supervised or mixed");
  augment_cmd->add_option("--out", out)->required();
  add_eval(augment_cmd);

  auto* curve_cmd = app.add_subcommand("curve", "data-efficiency curve against pre-exploration");
  curve_cmd->add_option("--data", data_dir)->required();
  curve_cmd->add_option("--checkpoint", checkpoint)->required();
  curve_cmd->add_option("--items", items, "human-guided items (.jsonl)")->required();
  curve_cmd->add_option("--t-b", t_b, "evaluation episodes (.jsonl)")->required();
  curve_cmd->add_option("--finetune-mode", finetune_mode, "supervised or mixed");
  curve_cmd->add_option("--out", out)->required();

  auto* report_cmd = app.add_subcommand("report", "render CSVs as SVG plots and a summary table");
  report_cmd->add_option("--input", inputs, "sweep or curve CSV")->required();
  report_cmd->add_option("--out", out)->required();

  auto* interactive_cmd = app.add_subcommand("interactive", "answer the agent's questions yourself");
  interactive_cmd->add_option("--data", data_dir)->required();
  interactive_cmd->add_option("--checkpoint", checkpoint)->required();
  interactive_cmd->add_option("--agent", agent, "mc or asa");
  interactive_cmd->add_option("--episode", episode_index, "episode index in the split");
  interactive_cmd->add_option("--out", out, "trace output (.jsonl)")->required();
  add_eval(interactive_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto c = load_config(config_path, seed);
    if (epsilon) c.eval.run.epsilon = *epsilon;
    if (noise_c) c.eval.run.oracle.noise_c = *noise_c;
    if (split) c.eval.split = *split;
    if (limit) c.eval.limit = *limit;
    if (!agent.empty() && augment_cmd->parsed()) c.augment.agent = agent == "base" ? c.augment.agent : agent;
    if (!split_mode.empty()) c.augment.split_mode = split_mode;
    if (!finetune_mode.empty()) c.augment.finetune.mode = augment::parse_finetune_mode(finetune_mode);
    oracle::validate(c.eval.run.oracle);

    if (gen_world->parsed()) return cmd_gen_world(c, world_path);
    if (gen_data->parsed()) return cmd_gen_data(c, out);
    if (train_cmd->parsed()) return cmd_train(c, data_dir, agent, init, r_ask, iterations, resume, out);
    if (run_cmd->parsed()) return cmd_run(c, data_dir, checkpoint, agent, out);
    if (sweep_cmd->parsed()) return cmd_sweep(c, data_dir, checkpoints, agent, axis, values, out);
    if (augment_cmd->parsed()) return cmd_augment(c, data_dir, checkpoint, interact_checkpoint, out);
    if (curve_cmd->parsed()) return cmd_curve(c, data_dir, checkpoint, items, t_b, out);
    if (report_cmd->parsed()) return cmd_report(inputs, out);
    if (interactive_cmd->parsed()) return cmd_interactive(c, data_dir, checkpoint, agent, episode_index, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const diff::NonFiniteGradient& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
