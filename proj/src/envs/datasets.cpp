#include "ssmail/envs/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "ssmail/common/error.hpp"

namespace ssmail::envs {

namespace {

Point2 along(const std::vector<Point2>& line, const std::vector<double>& cum, double dist) {
  auto it = std::upper_bound(cum.begin(), cum.end(), dist);
  std::size_t seg = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  seg = std::min(seg, line.size() - 2);
  const double len = cum[seg + 1] - cum[seg];
  const double u = std::clamp((dist - cum[seg]) / len, 0.0, 1.0);
  return {line[seg].x + u * (line[seg + 1].x - line[seg].x), line[seg].y + u * (line[seg + 1].y - line[seg].y)};
}

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_cell(const std::string& cell, std::size_t line_no, const char* what) {
  T value{};
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error("trajectory csv line " + std::to_string(line_no) + ": bad " + what + " '" + cell + "'");
  }
  return value;
}

}  // namespace

std::vector<Trajectory> letters_expert(const std::vector<std::vector<Point2>>& polylines, std::size_t horizon,
                                       double dt) {
  if (polylines.empty()) throw Error("letters_expert: no polylines");
  if (horizon == 0) throw Error("letters_expert: zero horizon");
  const std::size_t n = polylines.size();
  Trajectory tr(horizon, n, 2, 2, dt);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& line = polylines[i];
    if (line.size() < 2) throw Error("letters_expert: polyline " + std::to_string(i) + " needs two waypoints");
    std::vector<double> cum{0.0};
    for (std::size_t k = 1; k < line.size(); ++k) {
      const double len = std::hypot(line[k].x - line[k - 1].x, line[k].y - line[k - 1].y);
      if (len == 0.0) throw Error("letters_expert: repeated waypoint in polyline " + std::to_string(i));
      cum.push_back(cum.back() + len);
    }
    const double step = cum.back() / static_cast<double>(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      const Point2 p = along(line, cum, step * static_cast<double>(t));
      const Point2 q = t + 1 == horizon ? line.back() : along(line, cum, step * static_cast<double>(t + 1));
      tr.s(t, i, 0) = p.x;
      tr.s(t, i, 1) = p.y;
      tr.a(t, i, 0) = (q.x - p.x) / dt;
      tr.a(t, i, 1) = (q.y - p.y) / dt;
    }
  }
  return {tr};
}

std::vector<std::vector<Point2>> ml_letters() {
  return {{{0, 0}, {0, 2}, {1, 1}, {2, 2}, {2, 0}}, {{3, 2}, {3, 0}, {4.5, 0}}};
}

Normalizer::Normalizer(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size() || lo_.empty()) throw Error("Normalizer: bound sizes differ or are empty");
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (!(hi_[k] > lo_[k])) throw Error("Normalizer: dimension " + std::to_string(k) + " has zero range");
  }
}

Normalizer Normalizer::fit(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw Error("Normalizer::fit: no trajectories");
  const std::size_t d = trajs.front().state_dim;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& tr : trajs) {
    if (tr.state_dim != d) throw Error("Normalizer::fit: inconsistent state dims");
    for (std::size_t idx = 0; idx < tr.states.size(); ++idx) {
      const std::size_t k = idx % d;
      lo[k] = std::min(lo[k], tr.states[idx]);
      hi[k] = std::max(hi[k], tr.states[idx]);
    }
  }
  return Normalizer(std::move(lo), std::move(hi));
}

void Normalizer::normalize(std::span<double> data) const {
  for (std::size_t idx = 0; idx < data.size(); ++idx) data[idx] = normalize(data[idx], idx % dims());
}

void Normalizer::denormalize(std::span<double> data) const {
  for (std::size_t idx = 0; idx < data.size(); ++idx) data[idx] = denormalize(data[idx], idx % dims());
}

Trajectory Normalizer::apply(const Trajectory& tr) const {
  if (tr.state_dim != dims()) throw Error("Normalizer::apply: state dim mismatch");
  Trajectory out = tr;
  normalize(out.states);
  if (tr.action_dim == tr.state_dim) {
    for (std::size_t idx = 0; idx < out.actions.size(); ++idx) out.actions[idx] /= scale(idx % dims());
  }
  return out;
}

void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw Error("write_trajectories_csv: nothing to write");
  const auto& first = trajs.front();
  std::ofstream os(path);
  if (!os) throw Error("write_trajectories_csv: cannot open '" + path.string() + "'");
  os << "episode,t,agent";
  for (std::size_t k = 0; k < first.state_dim; ++k) os << ",s" << k;
  for (std::size_t k = 0; k < first.action_dim; ++k) os << ",a" << k;
  os << ",mode\n";
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    const auto& tr = trajs[e];
    if (tr.agents != first.agents || tr.state_dim != first.state_dim || tr.action_dim != first.action_dim) {
      throw Error("write_trajectories_csv: episode " + std::to_string(e) + " has different dimensions");
    }
    const std::string mode = tr.mode ? std::to_string(*tr.mode) : "";
    for (std::size_t t = 0; t < tr.horizon; ++t) {
      for (std::size_t i = 0; i < tr.agents; ++i) {
        os << e << ',' << t << ',' << i;
        for (std::size_t k = 0; k < tr.state_dim; ++k) os << ',' << fmt17(tr.s(t, i, k));
        for (std::size_t k = 0; k < tr.action_dim; ++k) os << ',' << fmt17(tr.a(t, i, k));
        os << ',' << mode << '\n';
      }
    }
  }
}

std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path, double dt) {
  std::ifstream is(path);
  if (!is) throw Error("read_trajectories_csv: cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw Error("read_trajectories_csv: '" + path.string() + "' is empty");
  const auto header = split_csv(line);
  std::size_t ds = 0;
  std::size_t da = 0;
  if (header.size() < 5 || header[0] != "episode" || header[1] != "t" || header[2] != "agent" ||
      header.back() != "mode") {
    throw Error("trajectory csv line 1: expected header episode,t,agent,s0..,a0..,mode");
  }
  for (std::size_t c = 3; c + 1 < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "s" + std::to_string(ds) && da == 0) {
      ++ds;
    } else if (h == "a" + std::to_string(da)) {
      ++da;
    } else {
      throw Error("trajectory csv line 1: unexpected column '" + h + "'");
    }
  }
  if (ds == 0) throw Error("trajectory csv line 1: no state columns");

  struct Row {
    std::size_t t;
    std::size_t agent;
    std::vector<double> values;
    std::size_t line_no;
  };
  std::map<std::size_t, std::vector<Row>> episodes;
  std::map<std::size_t, std::optional<int>> modes;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw Error("trajectory csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                  " fields, got " + std::to_string(cells.size()));
    }
    Row row{parse_cell<std::size_t>(cells[1], line_no, "t"), parse_cell<std::size_t>(cells[2], line_no, "agent"), {},
            line_no};
    for (std::size_t c = 3; c < 3 + ds + da; ++c) {
      const double v = parse_cell<double>(cells[c], line_no, "value");
      if (!std::isfinite(v)) throw Error("trajectory csv line " + std::to_string(line_no) + ": non-finite value");
      row.values.push_back(v);
    }
    const auto ep = parse_cell<std::size_t>(cells[0], line_no, "episode");
    std::optional<int> mode;
    if (!cells.back().empty()) mode = parse_cell<int>(cells.back(), line_no, "mode");
    if (episodes.count(ep) && modes[ep] != mode) {
      throw Error("trajectory csv line " + std::to_string(line_no) + ": mode changes within episode");
    }
    modes[ep] = mode;
    episodes[ep].push_back(std::move(row));
  }
  if (episodes.empty()) throw Error("read_trajectories_csv: '" + path.string() + "' has no data rows");

  std::vector<Trajectory> out;
  std::optional<std::size_t> agents;
  for (auto& [ep, rows] : episodes) {
    std::size_t n = 0;
    std::size_t T = 0;
    for (const auto& r : rows) {
      n = std::max(n, r.agent + 1);
      T = std::max(T, r.t + 1);
    }
    if (agents && *agents != n) {
      throw Error("trajectory csv line " + std::to_string(rows.front().line_no) + ": episode " + std::to_string(ep) +
                  " has " + std::to_string(n) + " agents, expected " + std::to_string(*agents));
    }
    agents = n;
    if (rows.size() != n * T) {
      throw Error("trajectory csv line " + std::to_string(rows.back().line_no) + ": episode " + std::to_string(ep) +
                  " is missing (t, agent) rows");
    }
    Trajectory tr(T, n, ds, da, dt);
    std::vector<bool> seen(n * T, false);
    for (const auto& r : rows) {
      if (seen[r.t * n + r.agent]) {
        throw Error("trajectory csv line " + std::to_string(r.line_no) + ": duplicate (t, agent) row");
      }
      seen[r.t * n + r.agent] = true;
      for (std::size_t k = 0; k < ds; ++k) tr.s(r.t, r.agent, k) = r.values[k];
      for (std::size_t k = 0; k < da; ++k) tr.a(r.t, r.agent, k) = r.values[ds + k];
    }
    tr.mode = modes[ep];
    out.push_back(std::move(tr));
  }
  return out;
}

LoadedDataset load_trajectories(const std::filesystem::path& path, double dt) {
  LoadedDataset d;
  d.raw = read_trajectories_csv(path, dt);
  d.normalizer = Normalizer::fit(d.raw);
  for (const auto& tr : d.raw) d.normalized.push_back(d.normalizer.apply(tr));
  return d;
}

Trajectory inject_noise(const Trajectory& tr, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw Error("inject_noise: sigma must be non-negative");
  Trajectory out = tr;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& x : out.states) x += rng.normal(0.0, sigma);
  return out;
}

std::vector<Trajectory> orbit_dataset(std::size_t episodes, std::uint64_t seed, const OrbitDatasetConfig& cfg) {
  Rng rng(seed);
  std::vector<Trajectory> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    Trajectory tr(cfg.horizon, cfg.agents, 2, 2, cfg.dt);
    const double cx = rng.uniform(-1.0, 1.0);
    const double cy = rng.uniform(-1.0, 1.0);
    const double vx = rng.uniform(-0.3, 0.3);
    const double vy = rng.uniform(-0.3, 0.3);
    const double omega = rng.uniform(cfg.omega_min, cfg.omega_max) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> radius(cfg.agents);
    for (auto& r : radius) r = rng.uniform(cfg.radius_min, cfg.radius_max);
    auto pos = [&](std::size_t i, double t) {
      const double phase = phase0 + omega * t + 2.0 * std::numbers::pi * static_cast<double>(i) / cfg.agents;
      return Point2{cx + vx * t + radius[i] * std::cos(phase), cy + vy * t + radius[i] * std::sin(phase)};
    };
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      for (std::size_t i = 0; i < cfg.agents; ++i) {
        const auto p = pos(i, cfg.dt * static_cast<double>(t));
        const auto q = pos(i, cfg.dt * static_cast<double>(t + 1));
        tr.s(t, i, 0) = p.x;
        tr.s(t, i, 1) = p.y;
        tr.a(t, i, 0) = (q.x - p.x) / cfg.dt;
        tr.a(t, i, 1) = (q.y - p.y) / cfg.dt;
      }
    }
    out.push_back(std::move(tr));
  }
  return out;
}

DatasetEnv::DatasetEnv(std::vector<Trajectory> experts, double v_max) : experts_(std::move(experts)) {
  if (experts_.empty()) throw Error("DatasetEnv: empty dataset");
  const auto& f = experts_.front();
  if (f.state_dim != f.action_dim) throw Error("DatasetEnv: integrator needs equal state and action dims");
  for (const auto& tr : experts_) {
    tr.validate();
    if (tr.agents != f.agents || tr.state_dim != f.state_dim || tr.horizon != f.horizon) {
      throw Error("DatasetEnv: trajectories differ in shape");
    }
  }
  spec_ = EnvSpec{f.agents, f.state_dim, f.action_dim, f.horizon, f.dt, v_max};
}

Trajectory DatasetEnv::sample_expert(Rng& rng) const { return experts_[rng.index(experts_.size())]; }

}  // namespace ssmail::envs
