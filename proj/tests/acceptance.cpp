// Acceptance run: one PASS/FAIL line per criterion. Criteria 5-10 train
// models per seed and judge the median over seeds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "askroute/augment.hpp"
#include "askroute/diff/gradcheck.hpp"
#include "askroute/episode.hpp"
#include "askroute/evalkit.hpp"
#include "askroute/interact.hpp"
#include "askroute/io/binary.hpp"
#include "askroute/langgen.hpp"
#include "askroute/oracle.hpp"
#include "askroute/trainer.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace askroute;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void progress(const std::string& msg) {
  static const auto start = Clock::now();
  std::fprintf(stderr, "[%7.1fs] %s\n", seconds_since(start), msg.c_str());
}

struct Verdict {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- 1 to 4

void criterion_gradients() {
  const auto t0 = Clock::now();
  world::WorldConfig wc;
  wc.num_viewpoints = 16;
  wc.embed_dim = 4;
  const auto w = world::generate_world(wc, 3);
  const auto e = data::sample_episode(w, 0, 11, {2, 2}, 0.0);
  double worst = 0.0;
  std::string where;
  for (bool ask : {false, true}) {
    policy::ModelConfig mc;
    mc.vocab_size = static_cast<int>(lang::vocabulary().size());
    mc.word_dim = 4;
    mc.visual_dim = 4;
    mc.hidden = 8;
    mc.ask_enabled = ask;
    const auto params = policy::init_params(mc, 7).cast<double>();
    train::TrainConfig config;
    config.ask_enabled = ask;
    config.il_exclude_ask = ask;
    config.detach_critic = false;
    Rng rng(3);
    train::EpisodeLoss<double> recorded;
    {
      diff::Tape<double> t;
      policy::Policy<double> net(t, params, false);
      recorded = train::episode_loss(net, w, e, config, rng);
    }
    const auto actions = recorded.sampled;
    const auto advantages = recorded.advantages;
    const auto r = diff::check_gradients<double>(
        [&](diff::Tape<double>& t, const diff::BoundTensors<double>& bound) {
          policy::Policy<double> net(t, params.config, bound, false);
          Rng unused(0);
          return train::episode_loss(net, w, e, config, unused, {&actions, &advantages}).total;
        },
        params.tensors, 1e-4);
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      where = r.worst_tensor;
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst < 1e-4 && secs < 60.0,
         fmt("end-to-end loss gradcheck, 2-step episode, H=8: max relative error %.2e (< 1e-4, at %s), %.1f s (< 60 s)",
             worst, where.c_str(), secs));
}

std::vector<int> random_walk(const world::WorldGraph& w, int start, int steps, Rng& rng) {
  std::vector<int> walk{start};
  for (int i = 0; i < steps; ++i) {
    const auto& nb = w.neighbors(walk.back());
    walk.push_back(nb[rng.below(nb.size())].to);
  }
  return walk;
}

void criterion_shaping() {
  const auto w = world::generate_world(world::WorldConfig{}, 32);
  Rng rng(2);
  double dis_err = 0.0;
  int dev_checked = 0, dev_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int start = static_cast<int>(rng.below(w.size()));
    const int target = static_cast<int>(rng.below(w.size()));
    const auto walk = random_walk(w, start, 1 + static_cast<int>(rng.below(15)), rng);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < walk.size(); ++i) total += train::distance_shaping(w, walk[i], walk[i + 1], target);
    dis_err = std::max(dis_err, std::abs(total - (world::distance(w, start, target) - world::distance(w, walk.back(), target))));

    const auto gt = world::shortest_path(w, start, target);
    const std::set<int> on(gt.begin(), gt.end());
    for (std::size_t i = 0; i + 1 < walk.size(); ++i) {
      if (!on.count(walk[i + 1])) continue;
      ++dev_checked;
      dev_violations += train::deviation_shaping(w, walk[i], walk[i + 1], gt) != 0.0;
    }
    // Walking the reference path itself.
    for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
      ++dev_checked;
      dev_violations += train::deviation_shaping(w, gt[i], gt[i + 1], gt) != 0.0;
    }
  }

  double target_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<train::RewardRecord> r(1 + rng.below(12));
    for (auto& x : r) {
      x.dis = rng.uniform(-3, 3);
      x.dev = -rng.uniform(0, 3);
      x.ask_penalty = rng.bernoulli(0.3) ? -0.3 : 0.0;
      x.terminal = rng.bernoulli(0.2) ? rng.uniform(-2, 2) : 0.0;
    }
    const double gamma = rng.uniform(0.5, 1.0);
    const auto targets = train::returns_and_targets(r, gamma);
    double g = 0.0;
    for (std::size_t k = r.size(); k-- > 0;) {
      g = r[k].terminal + gamma * g;
      target_err = std::max(target_err, std::abs(targets[k] - (r[k].dev + r[k].dis + r[k].ask_penalty + g)));
    }
  }
  report(2, dis_err <= 1e-9 && dev_violations == 0 && target_err <= 1e-12,
         fmt("DIS telescoping max error %.1e over 1000 rollouts; DEV nonzero on %d of %d on-path steps; critic targets "
             "vs backward recursion max error %.1e",
             dis_err, dev_violations, dev_checked, target_err));
}

double chi2_critical_1pct(std::size_t df) {
  static const double table[] = {0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812};
  return table[df];
}

void criterion_oracle() {
  const std::vector<double> bearings{0.0, 0.5, 1.4, 2.6, -2.2, -0.9};
  std::vector<fixtures::Vec3> pos{{0, 0, 0}};
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    pos.push_back({3 * std::cos(bearings[i]), 3 * std::sin(bearings[i]), 0});
    edges.emplace_back(0, static_cast<int>(i + 1));
  }
  const auto w = fixtures::make_world(pos, edges);
  const auto actions = world::navigable_actions(w, 0);
  const int target = 1;

  std::map<int, double> weight;
  double z = 0.0;
  for (std::size_t i = 1; i < bearings.size(); ++i) {
    double gap = std::fmod(std::abs(bearings[i] - bearings[0]), 2 * world::kPi);
    if (gap > world::kPi) gap = 2 * world::kPi - gap;
    weight[static_cast<int>(i + 1)] = std::exp(-gap);
    z += std::exp(-gap);
  }

  oracle::OracleConfig c;
  c.noise_c = 0.3;
  Rng rng(8);
  const int n = 100000;
  int distorted = 0;
  std::map<int, int> counts;
  for (int i = 0; i < n; ++i) {
    const auto a = oracle::respond(w, 0, target, actions, c, rng);
    if (!a.was_distorted) continue;
    ++distorted;
    ++counts[actions.moves[a.action_index].destination];
  }
  double chi2 = 0.0;
  for (const auto& [dest, wgt] : weight) {
    const double expected = distorted * wgt / z;
    chi2 += (counts[dest] - expected) * (counts[dest] - expected) / expected;
  }
  const double freq = static_cast<double>(distorted) / n;
  const double crit = chi2_critical_1pct(weight.size() - 1);
  report(3, std::abs(freq - 0.30) <= 0.01 && chi2 < crit,
         fmt("C=0.3 over 1e5 queries: distortion frequency %.4f (0.30 +- 0.01); chi-square %.2f < %.3f (df %zu, 1%%)",
             freq, chi2, crit, weight.size() - 1));
}

void criterion_metric() {
  const double v = eval::ask_percentage(1.99, 4.92);
  report(4, std::abs(v - 0.287) <= 0.002, fmt("ask%% from 1.99 asks and 4.92 moves = %.4f (0.287 +- 0.002)", v));
}

// ---------------------------------------------------------------- 5 to 11

struct Scale {
  int base_iterations = 3000;
  int asa_iterations = 3000;
  int eval_limit = 0;  // 0 keeps every unseen-world episode
};

const std::vector<double> kEpsilons{0.1, 0.2, 0.3, 0.4, 0.5};
const std::vector<double> kRAsk{0.1, 0.3, 0.5};
const std::vector<double> kNoise{0.0, 0.2, 0.4};
constexpr double kMcNoiseEpsilon = 0.5;
constexpr double kAblationRAsk = 0.3;
constexpr double kQuestionBudget = 1.5;

struct SeedRun {
  std::map<std::string, std::string> files;  // metrics CSVs by name
  eval::Metrics base;
  std::vector<eval::Metrics> mc_epsilon, mc_noise;
  std::map<double, std::vector<eval::Metrics>> asa;  // by r_ask, over kNoise
  eval::Metrics asa_nodev;
  double base_train_s = 0.0;
  std::map<double, double> asa_train_s, asa_eval_s;
  // Continual learning, filled by run_augment.
  double tb_base_sr = 0.0, tb_finetuned_sr = 0.0;
  std::vector<augment::CurvePoint> curve, supervised_curve;
  double collected_sr = 0.0;
  std::size_t t_a = 0, t_b = 0, usable = 0;
};

std::vector<eval::SweepRow> rows_of(eval::Axis axis, const std::vector<double>& values,
                                    const std::vector<eval::Metrics>& metrics) {
  std::vector<eval::SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({axis, values[i], metrics[i]});
  return rows;
}

std::string training_csv(const std::vector<train::CurveRow>& rows) {
  std::string out = train::curve_header() + "\n";
  for (const auto& r : rows) out += train::curve_line(r) + "\n";
  return out;
}

struct Pipeline {
  std::uint64_t seed;
  Scale scale;
  data::Benchmark bench;
  std::vector<data::Episode> eval_set;
  train::TrainConfig base_config;

  Pipeline(std::uint64_t s, Scale sc) : seed(s), scale(sc) {
    data::BenchmarkConfig bc;
    bc.seed = seed;
    bench = data::build_benchmark(bc);
    eval_set = bench.val_unseen;
    if (scale.eval_limit > 0 && static_cast<std::size_t>(scale.eval_limit) < eval_set.size())
      eval_set.resize(static_cast<std::size_t>(scale.eval_limit));
    base_config.model.vocab_size = static_cast<int>(lang::vocabulary().size());
    base_config.seed = seed;
    base_config.iterations = scale.base_iterations;
  }

  eval::Metrics evaluate(agent::AgentKind kind, const policy::ModelParams& p, double epsilon, double noise) const {
    agent::RunOptions o;
    o.epsilon = epsilon;
    o.oracle.noise_c = noise;
    o.oracle.seed = seed;
    return eval::aggregate(bench.worlds, agent::run_all(kind, p, bench.worlds, eval_set, o));
  }

  policy::ModelParams train_model(const train::TrainConfig& config, policy::ModelParams init, const std::string& name,
                                  SeedRun& out, double& secs) const {
    const auto t0 = Clock::now();
    auto state = train::make_state(config, std::move(init));
    const auto rows = train::train(state, config, bench.worlds, bench.train, {});
    secs = seconds_since(t0);
    out.files[name + "_training.csv"] = training_csv(rows);
    return state.params;
  }

  train::TrainConfig asa_config(double r_ask, bool dev) const {
    auto c = base_config;
    c.ask_enabled = true;
    c.r_ask = r_ask;
    c.dev_enabled = dev;
    c.iterations = scale.asa_iterations;
    return c;
  }

  SeedRun run() const {
    SeedRun out;
    const std::string tag = "seed " + std::to_string(seed);
    progress(tag + ": training base model");
    const auto base =
        train_model(base_config, policy::init_params(base_config.model, seed), "base", out, out.base_train_s);
    out.base = evaluate(agent::AgentKind::base, base, 0.3, 0.0);
    progress(tag + fmt(": base unseen SR %.3f (%.0f s)", out.base.success_rate, out.base_train_s));

    for (double e : kEpsilons) out.mc_epsilon.push_back(evaluate(agent::AgentKind::mc, base, e, 0.0));
    for (double c : kNoise) out.mc_noise.push_back(evaluate(agent::AgentKind::mc, base, kMcNoiseEpsilon, c));
    out.files["mc_epsilon.csv"] = eval::sweep_csv(rows_of(eval::Axis::epsilon, kEpsilons, out.mc_epsilon));
    out.files["mc_noise.csv"] = eval::sweep_csv(rows_of(eval::Axis::noise_c, kNoise, out.mc_noise));

    std::map<double, policy::ModelParams> asa_models;
    for (double r : kRAsk) {
      progress(tag + fmt(": training ASA r_ask %.1f", r));
      double secs = 0.0;
      auto p = train_model(asa_config(r, true), policy::with_ask(base, true), fmt("asa_r%.1f", r), out, secs);
      out.asa_train_s[r] = secs;
      for (double c : kNoise) {
        const auto t0 = Clock::now();
        out.asa[r].push_back(evaluate(agent::AgentKind::asa, p, 0.3, c));
        if (c == 0.0) out.asa_eval_s[r] = seconds_since(t0);
      }
      out.files[fmt("asa_r%.1f_noise.csv", r)] = eval::sweep_csv(rows_of(eval::Axis::noise_c, kNoise, out.asa[r]));
      progress(tag + fmt(": ASA r_ask %.1f SR %.3f q %.2f (%.0f s)", r, out.asa[r][0].success_rate,
                         out.asa[r][0].mean_questions, secs));
      asa_models.emplace(r, std::move(p));
    }
    std::vector<eval::Metrics> r_rows;
    for (double r : kRAsk) r_rows.push_back(out.asa[r][0]);
    out.files["asa_r_ask.csv"] = eval::sweep_csv(rows_of(eval::Axis::r_ask, kRAsk, r_rows));

    progress(tag + ": training ASA without deviation shaping");
    double secs = 0.0;
    const auto nodev =
        train_model(asa_config(kAblationRAsk, false), policy::with_ask(base, true), "asa_nodev", out, secs);
    out.asa_nodev = evaluate(agent::AgentKind::asa, nodev, 0.3, 0.0);
    out.files["asa_nodev.csv"] =
        eval::sweep_csv(rows_of(eval::Axis::r_ask, {kAblationRAsk}, {out.asa_nodev}));

    // The interacting agent for augmentation: best ASA within the question budget.
    double chosen = kRAsk.front();
    double best = -1.0;
    for (double r : kRAsk) {
      const auto& m = out.asa[r][0];
      if (m.mean_questions <= kQuestionBudget && m.success_rate > best) {
        best = m.success_rate;
        chosen = r;
      }
    }
    run_augment(base, asa_models.at(chosen), out);
    return out;
  }

  void run_augment(const policy::ModelParams& base, const policy::ModelParams& asa, SeedRun& out) const {
    const std::string tag = "seed " + std::to_string(seed);
    progress(tag + ": human-guided augmentation");
    const auto sp = augment::split(eval_set, augment::SplitMode::disjoint, derive_seed(seed, 0xa5));
    out.t_a = sp.t_a.size();
    out.t_b = sp.t_b.size();
    agent::RunOptions o;
    o.oracle.seed = seed;
    const auto human = augment::collect_interactions(agent::AgentKind::asa, asa, bench.worlds, sp.t_a, o);
    std::size_t reached = 0;
    for (std::size_t i = 0; i < human.size(); ++i) {
      const auto& w = bench.worlds.at(static_cast<std::size_t>(human[i].world));
      reached += world::distance(w, human[i].trajectory.back(), sp.t_a[i].target) < eval::kSuccessRadius;
      out.usable += !human[i].truncated;
    }
    out.collected_sr = static_cast<double>(reached) / static_cast<double>(human.size());

    augment::FinetuneConfig fc;
    fc.train = base_config;
    auto sr_on_tb = [&](const policy::ModelParams& p) {
      return eval::aggregate(bench.worlds, agent::run_all(agent::AgentKind::base, p, bench.worlds, sp.t_b, {}))
          .success_rate;
    };
    out.tb_base_sr = sr_on_tb(base);
    out.tb_finetuned_sr = sr_on_tb(augment::finetune(base, bench.worlds, human, fc));

    const int u = static_cast<int>(out.usable);
    const std::vector<int> sizes{0, u / 4, u / 2, 3 * u / 4, u};
    std::vector<int> unseen;
    for (int i = 0; i < bench.config.unseen_worlds; ++i) unseen.push_back(bench.config.train_worlds + i);
    const auto preexp = augment::pre_exploration_data(bench.worlds, unseen, std::max(u, 1), derive_seed(seed, 0x9e),
                                                      bench.config.lengths);
    out.curve = augment::data_efficiency_curve(base, bench.worlds, human, preexp, sp.t_b, sizes, fc);
    auto sup = fc;
    sup.mode = augment::FinetuneMode::supervised;
    out.supervised_curve = augment::data_efficiency_curve(base, bench.worlds, human, preexp, sp.t_b, {0, u}, sup);
    out.files["augment_curve.csv"] = augment::curve_csv(out.curve);
    out.files["augment_curve_supervised.csv"] = augment::curve_csv(out.supervised_curve);
    out.files["augment_finetune.csv"] = fmt("t_a,t_b,collected_sr,base_sr,finetuned_sr\n%zu,%zu,%.6f,%.6f,%.6f\n", out.t_a,
                                            out.t_b, out.collected_sr, out.tb_base_sr, out.tb_finetuned_sr);
    progress(tag + fmt(": T_b base %.3f fine-tuned %.3f", out.tb_base_sr, out.tb_finetuned_sr));
  }
};

void write_files(const fs::path& dir, const SeedRun& run) {
  fs::create_directories(dir);
  for (const auto& [name, text] : run.files) io::write_file_atomic(dir / name, text);
}

// Median over seeds of one metric picked from each run.
template <typename F>
double med(const std::vector<SeedRun>& runs, F pick) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(pick(r));
  return median(v);
}

std::string join(const std::vector<double>& v, const char* f = "%.3f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + fmt(f, v[i]);
  return s;
}

void judge(const std::vector<SeedRun>& runs) {
  const double base_sr = med(runs, [](const SeedRun& r) { return r.base.success_rate; });

  // 5: best ASA within the question budget.
  double chosen = -1.0, chosen_sr = -1.0, chosen_q = 0.0;
  for (double r : kRAsk) {
    const double q = med(runs, [&](const SeedRun& s) { return s.asa.at(r)[0].mean_questions; });
    const double sr = med(runs, [&](const SeedRun& s) { return s.asa.at(r)[0].success_rate; });
    if (q <= kQuestionBudget && sr > chosen_sr) {
      chosen = r;
      chosen_sr = sr;
      chosen_q = q;
    }
  }
  if (chosen < 0) {
    report(5, false, fmt("no r_ask in {0.1,0.3,0.5} keeps median questions <= %.1f", kQuestionBudget));
  } else {
    const double train_s = med(runs, [&](const SeedRun& s) { return s.base_train_s + s.asa_train_s.at(chosen); });
    const double eval_s = med(runs, [&](const SeedRun& s) { return s.asa_eval_s.at(chosen); });
    report(5, chosen_sr >= base_sr + 0.10 && train_s <= 900.0 && eval_s <= 60.0,
           fmt("ASA r_ask %.1f: unseen SR %.3f vs base %.3f + 0.10, %.2f questions (<= 1.5); training %.0f s (<= 900), "
               "eval %.1f s (<= 60)",
               chosen, chosen_sr, base_sr, chosen_q, train_s, eval_s));
  }

  // 6: MC epsilon sweep.
  std::vector<double> q6, sr6;
  for (std::size_t i = 0; i < kEpsilons.size(); ++i) {
    q6.push_back(med(runs, [&](const SeedRun& s) { return s.mc_epsilon[i].mean_questions; }));
    sr6.push_back(med(runs, [&](const SeedRun& s) { return s.mc_epsilon[i].success_rate; }));
  }
  bool q_up = true;
  int inversions = 0;
  for (std::size_t i = 1; i < q6.size(); ++i) {
    q_up = q_up && q6[i] > q6[i - 1];
    inversions += sr6[i] < sr6[i - 1];
  }
  report(6, q_up && inversions <= 1,
         fmt("MC eps 0.1..0.5: questions %s (strictly increasing), SR %s (%d inversions, <= 1)", join(q6, "%.2f").c_str(),
             join(sr6).c_str(), inversions));

  // 7: questions fall as r_ask rises.
  std::vector<double> q7;
  for (double r : kRAsk) q7.push_back(med(runs, [&](const SeedRun& s) { return s.asa.at(r)[0].mean_questions; }));
  report(7, q7[1] < q7[0] && q7[2] < q7[1],
         fmt("ASA r_ask 0.1/0.3/0.5: questions %s (strictly decreasing)", join(q7, "%.2f").c_str()));

  // 8: noise adaptation.
  const double r8 = chosen < 0 ? kAblationRAsk : chosen;
  std::vector<double> asa_sr, asa_q, mc_sr, mc_q;
  for (std::size_t i = 0; i < kNoise.size(); ++i) {
    asa_sr.push_back(med(runs, [&](const SeedRun& s) { return s.asa.at(r8)[i].success_rate; }));
    asa_q.push_back(med(runs, [&](const SeedRun& s) { return s.asa.at(r8)[i].mean_questions; }));
    mc_sr.push_back(med(runs, [&](const SeedRun& s) { return s.mc_noise[i].success_rate; }));
    mc_q.push_back(med(runs, [&](const SeedRun& s) { return s.mc_noise[i].mean_questions; }));
  }
  const double asa_range = *std::max_element(asa_sr.begin(), asa_sr.end()) - *std::min_element(asa_sr.begin(), asa_sr.end());
  const bool asa_q_up = asa_q[1] > asa_q[0] && asa_q[2] > asa_q[1];
  double mc_q_dev = 0.0;
  for (double q : mc_q) mc_q_dev = std::max(mc_q_dev, std::abs(q - mc_q[0]) / mc_q[0]);
  const double mc_drop = mc_sr[0] - mc_sr[2];
  report(8, asa_range <= 0.05 && asa_q_up && mc_q_dev <= 0.05 && mc_drop >= 0.10,
         fmt("C 0/0.2/0.4: ASA (r_ask %.1f) SR %s range %.3f (<= 0.05), questions %s (increasing); MC (eps %.1f) "
             "questions %s max change %.1f%% (<= 5%%), SR %s drop %.3f (>= 0.10)",
             r8, join(asa_sr).c_str(), asa_range, join(asa_q, "%.2f").c_str(), kMcNoiseEpsilon,
             join(mc_q, "%.2f").c_str(), 100 * mc_q_dev, join(mc_sr).c_str(), mc_drop));

  // 9: deviation-shaping ablation.
  const double with_dev = med(runs, [](const SeedRun& s) { return s.asa.at(kAblationRAsk)[0].ask_pct; });
  const double without = med(runs, [](const SeedRun& s) { return s.asa_nodev.ask_pct; });
  report(9, without >= 2.0 * with_dev,
         fmt("r_ask %.1f: ask%% without DEV %.3f vs with DEV %.3f (need >= 2x, ratio %.2f)", kAblationRAsk, without,
             with_dev, with_dev > 0 ? without / with_dev : 0.0));

  // 10: continual learning.
  const double tb_base = med(runs, [](const SeedRun& s) { return s.tb_base_sr; });
  const double tb_tuned = med(runs, [](const SeedRun& s) { return s.tb_finetuned_sr; });
  const std::size_t points = runs.front().curve.size();
  std::vector<double> human, pre;
  for (std::size_t i = 0; i < points; ++i) {
    human.push_back(med(runs, [&](const SeedRun& s) { return s.curve[i].human_sr; }));
    pre.push_back(med(runs, [&](const SeedRun& s) { return s.curve[i].preexp_sr; }));
  }
  bool never_below = true;
  for (std::size_t i = 0; i < points; ++i) never_below = never_below && human[i] >= pre[i] - 0.01;
  const double max_gap = human.back() - pre.back();
  const double sup_gap = med(runs, [](const SeedRun& s) {
    return s.supervised_curve.back().human_sr - s.supervised_curve.back().preexp_sr;
  });
  report(10, tb_tuned - tb_base >= 0.03 && never_below && max_gap >= 0.03 && sup_gap > 0.0,
         fmt("disjoint T_b: fine-tuned SR %.3f vs base %.3f (lift >= 0.03); curve human %s vs pre-exploration %s "
             "(never below by > 0.01, gap at max %.3f >= 0.03); supervised gap %.3f (> 0)",
             tb_tuned, tb_base, join(human).c_str(), join(pre).c_str(), max_gap, sup_gap));
}

void criterion_reproducibility(std::uint64_t seed, const Scale& scale) {
  progress("reproducibility: reduced pipeline, run 1 of 2 (1 thread)");
  setenv("ASKROUTE_THREADS", "1", 1);
  const auto a = Pipeline(seed, scale).run();
  progress("reproducibility: reduced pipeline, run 2 of 2 (4 threads)");
  setenv("ASKROUTE_THREADS", "4", 1);
  const auto b = Pipeline(seed, scale).run();
  unsetenv("ASKROUTE_THREADS");
  std::vector<std::string> differing;
  for (const auto& [name, text] : a.files) {
    const auto it = b.files.find(name);
    if (it == b.files.end() || it->second != text) differing.push_back(name);
  }
  const bool same_set = a.files.size() == b.files.size();
  std::string detail = fmt("reduced pipeline (seed %llu, %d+%d iterations, %d episodes) repeated with 1 and 4 threads: ",
                           static_cast<unsigned long long>(seed), scale.base_iterations, scale.asa_iterations,
                           scale.eval_limit);
  detail += fmt("%zu of %zu metrics CSVs bit-identical", a.files.size() - differing.size(), a.files.size());
  for (const auto& d : differing) detail += "; differs: " + d;
  report(11, differing.empty() && same_set, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-11"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out = "acceptance_out";
  Scale scale;
  Scale repro{200, 100, 120};
  bool quick = false;
  app.add_option("--seeds", seeds, "training seeds")->delimiter(',');
  app.add_option("--out", out, "directory for metrics CSVs");
  app.add_option("--base-iterations", scale.base_iterations);
  app.add_option("--asa-iterations", scale.asa_iterations);
  app.add_option("--eval-limit", scale.eval_limit, "0 evaluates every unseen-world episode");
  app.add_flag("--quick", quick, "criteria 1-4 and 11 only");
  CLI11_PARSE(app, argc, argv);
  if (!quick) {
    try {
      for (auto s : seeds) fs::create_directories(fs::path(out) / ("seed_" + std::to_string(s)));
    } catch (const fs::filesystem_error& e) {
      std::fprintf(stderr, "acceptance: %s\n", e.what());
      return 2;
    }
  }

  std::printf("acceptance: seeds");
  for (auto s : seeds) std::printf(" %llu", static_cast<unsigned long long>(s));
  std::printf(", base %d + ASA %d iterations\n", scale.base_iterations, scale.asa_iterations);

  criterion_gradients();
  criterion_shaping();
  criterion_oracle();
  criterion_metric();

  if (!quick) {
    std::vector<SeedRun> runs;
    for (auto s : seeds) {
      runs.push_back(Pipeline(s, scale).run());
      write_files(fs::path(out) / ("seed_" + std::to_string(s)), runs.back());
    }
    judge(runs);
  }
  criterion_reproducibility(seeds.front(), repro);

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  int failed = 0;
  std::printf("\nsummary\n");
  for (const auto& v : verdicts) {
    std::printf("[%s] criterion %2d\n", v.pass ? "PASS" : "FAIL", v.id);
    failed += !v.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(verdicts.size()) - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
