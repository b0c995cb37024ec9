#include "askroute/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "askroute/errors.hpp"
#include "askroute/io/binary.hpp"

namespace askroute::eval {

void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"success_rate", m.success_rate}, {"mean_questions", m.mean_questions}, {"mean_moves", m.mean_moves},
       {"ask_pct", m.ask_pct},           {"episode_ask_pct", m.episode_ask_pct}, {"n", m.n}};
}

double ask_percentage(double asks, double moves) {
  const double total = asks + moves;
  return total > 0.0 ? asks / total : 0.0;
}

bool is_success(const world::WorldGraph& w, const agent::InteractionTrace& trace) {
  return world::distance(w, trace.final_viewpoint, trace.episode.target) < kSuccessRadius;
}

Metrics aggregate(const std::vector<world::WorldGraph>& worlds, const std::vector<agent::InteractionTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
  long successes = 0, asks = 0, moves = 0;
  double episode_pct = 0.0;
  for (const auto& t : traces) {
    successes += is_success(worlds.at(static_cast<std::size_t>(t.episode.world)), t) ? 1 : 0;
    asks += t.asks;
    moves += t.moves;
    episode_pct += ask_percentage(t.asks, t.moves);
  }
  const double n = static_cast<double>(traces.size());
  Metrics m;
  m.n = traces.size();
  m.success_rate = static_cast<double>(successes) / n;
  m.mean_questions = static_cast<double>(asks) / n;
  m.mean_moves = static_cast<double>(moves) / n;
  m.ask_pct = ask_percentage(static_cast<double>(asks), static_cast<double>(moves));
  m.episode_ask_pct = episode_pct / n;
  return m;
}

Axis parse_axis(const std::string& name) {
  if (name == "epsilon") return Axis::epsilon;
  if (name == "r_ask") return Axis::r_ask;
  if (name == "noise_c") return Axis::noise_c;
  if (name == "data_size") return Axis::data_size;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

std::string axis_name(Axis axis) {
  switch (axis) {
    case Axis::epsilon: return "epsilon";
    case Axis::r_ask: return "r_ask";
    case Axis::noise_c: return "noise_c";
    case Axis::data_size: return "data_size";
  }
  return "?";
}

std::vector<SweepRow> sweep(Axis axis, const std::vector<double>& values, const std::vector<world::WorldGraph>& worlds,
                            const std::function<std::vector<agent::InteractionTrace>(double)>& evaluate) {
  std::vector<SweepRow> rows;
  for (double v : values) rows.push_back({axis, v, aggregate(worlds, evaluate(v))});
  return rows;
}

std::vector<SweepRow> sweep_checkpoint(Axis axis, const std::vector<double>& values, agent::AgentKind kind,
                                       const policy::ModelParams& params, const std::vector<world::WorldGraph>& worlds,
                                       const std::vector<data::Episode>& episodes, const agent::RunOptions& base) {
  if (axis != Axis::epsilon && axis != Axis::noise_c) throw ConfigError("sweep: a single checkpoint sweeps epsilon or noise_c");
  if (axis == Axis::epsilon && kind != agent::AgentKind::mc) throw ConfigError("sweep: the epsilon axis needs the mc agent");
  return sweep(axis, values, worlds, [&](double v) {
    auto options = base;
    if (axis == Axis::epsilon) options.epsilon = v;
    else options.oracle.noise_c = v;
    return agent::run_all(kind, params, worlds, episodes, options);
  });
}

std::vector<SweepRow> sweep_r_ask(const std::map<double, policy::ModelParams>& checkpoints, const std::vector<double>& values,
                                  const std::vector<world::WorldGraph>& worlds, const std::vector<data::Episode>& episodes,
                                  const agent::RunOptions& options) {
  return sweep(Axis::r_ask, values, worlds, [&](double v) {
    auto it = checkpoints.find(v);
    if (it == checkpoints.end()) throw ConfigError("sweep: no checkpoint trained with r_ask=" + std::to_string(v));
    return agent::run_all(agent::AgentKind::asa, it->second, worlds, episodes, options);
  });
}

std::string sweep_csv_header() { return "axis,value,success_rate,mean_questions,mean_moves,ask_pct,n"; }

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = sweep_csv_header() + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%g,%.6f,%.6f,%.6f,%.6f,%zu\n", axis_name(r.axis).c_str(), r.value,
                  r.metrics.success_rate, r.metrics.mean_questions, r.metrics.mean_moves, r.metrics.ask_pct, r.metrics.n);
    out += buf;
  }
  return out;
}

nlohmann::json sweep_json(const std::vector<SweepRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = r.metrics;
    row["axis"] = axis_name(r.axis);
    row["value"] = r.value;
    j.push_back(row);
  }
  return {{"rows", j}, {"curve", curve_points(rows)}};
}

std::vector<std::pair<double, double>> curve_points(const std::vector<SweepRow>& rows) {
  std::vector<std::pair<double, double>> out;
  for (const auto& r : rows) out.emplace_back(r.metrics.ask_pct, r.metrics.success_rate);
  return out;
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != sweep_csv_header()) throw DataError(path.string() + ": not a sweep CSV");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw DataError(path.string() + ": malformed row '" + line + "'");
    try {
      SweepRow r;
      r.axis = parse_axis(f[0]);
      r.value = std::stod(f[1]);
      r.metrics.success_rate = std::stod(f[2]);
      r.metrics.mean_questions = std::stod(f[3]);
      r.metrics.mean_moves = std::stod(f[4]);
      r.metrics.ask_pct = std::stod(f[5]);
      r.metrics.n = std::stoul(f[6]);
      rows.push_back(r);
    } catch (const std::logic_error& e) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    o << "<text x=\"" << L - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
    << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 6];
    std::string pts;
    for (auto [x, y] : series[s].points) pts += fmt(px(x)) + "," + fmt(py(y)) + " ";
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    for (auto [x, y] : series[s].points)
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    const double ly = T + 16 + 18 * static_cast<double>(s);
    o << "<rect x=\"" << W - R + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << c << "\"/>\n";
    o << "<text x=\"" << W - R + 30 << "\" y=\"" << ly + 1 << "\">" << escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string summary_table(const std::vector<SweepRow>& rows) {
  std::string out = "| axis | value | success rate | questions | moves | ask % | n |\n|---|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %g | %.3f | %.2f | %.2f | %.1f | %zu |\n", axis_name(r.axis).c_str(), r.value,
                  r.metrics.success_rate, r.metrics.mean_questions, r.metrics.mean_moves, 100.0 * r.metrics.ask_pct,
                  r.metrics.n);
    out += buf;
  }
  return out;
}

}  // namespace askroute::eval
