#include "ssmail/trainer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::trainer {

double state_mse(const envs::Trajectory& a, const envs::Trajectory& b) {
  if (a.horizon != b.horizon || a.states.size() != b.states.size()) {
    throw Error("state_mse: horizons differ (" + std::to_string(a.horizon) + " vs " + std::to_string(b.horizon) + ")");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    const double d = a.states[k] - b.states[k];
    s += d * d;
  }
  return s / static_cast<double>(a.states.size());
}

double training_error(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& modes) {
  if (modes.empty()) throw Error("training_error: no expert modes");
  if (generated.empty()) throw Error("training_error: no generated episodes");
  double total = 0.0;
  for (const auto& g : generated) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : modes) best = std::min(best, state_mse(g, m));
    total += best;
  }
  return total / static_cast<double>(generated.size());
}

double paired_error(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& refs) {
  if (generated.empty() || generated.size() != refs.size()) throw Error("paired_error: episode counts differ");
  double total = 0.0;
  for (std::size_t k = 0; k < generated.size(); ++k) total += state_mse(generated[k], refs[k]);
  return total / static_cast<double>(generated.size());
}

double endpoint_distance(const envs::Trajectory& a, const envs::Trajectory& b) {
  if (a.agents != b.agents || a.state_dim != b.state_dim) throw Error("endpoint_distance: shapes differ");
  const auto ea = a.terminal_state();
  const auto eb = b.terminal_state();
  double total = 0.0;
  for (std::size_t i = 0; i < a.agents; ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < a.state_dim; ++k) {
      const double d = ea[i * a.state_dim + k] - eb[i * a.state_dim + k];
      d2 += d * d;
    }
    total += std::sqrt(d2);
  }
  return total / static_cast<double>(a.agents);
}

ModeCoverage mode_coverage(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& modes) {
  if (modes.size() < 2) throw Error("mode_coverage: needs at least two modes");
  ModeCoverage out;
  out.frequency.assign(modes.size(), 0.0);
  if (generated.empty()) return out;
  for (const auto& g : generated) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const double d = endpoint_distance(g, modes[m]);
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    out.frequency[best] += 1.0;
    out.mean_distance += best_d;
  }
  const double n = static_cast<double>(generated.size());
  for (auto& f : out.frequency) f /= n;
  out.mean_distance /= n;
  return out;
}

std::vector<double> compounding_error(Controller& ctrl, const envs::Environment& env, const envs::Normalizer& norm,
                                      const std::vector<envs::Trajectory>& data, double noise_sigma,
                                      const std::vector<std::size_t>& horizons, std::size_t prefix,
                                      std::uint64_t seed) {
  if (data.empty()) throw Error("compounding_error: empty dataset");
  if (horizons.empty()) return {};
  if (prefix == 0) throw Error("compounding_error: prefix must be positive");
  const std::size_t B = data.size();
  const std::size_t T = data.front().horizon;
  std::size_t last = 0;
  for (auto h : horizons) {
    if (h == 0) throw Error("compounding_error: horizons must be positive");
    if (prefix - 1 + h > T) {
      throw Error("compounding_error: horizon " + std::to_string(h) + " with prefix " + std::to_string(prefix) +
                  " exceeds trajectory length " + std::to_string(T));
    }
    last = std::max(last, prefix - 1 + h);
  }
  for (const auto& tr : data) {
    if (tr.horizon != T) throw Error("compounding_error: trajectories differ in length");
  }
  // ground truth states 0..T, the last one implied by the final action
  std::vector<std::vector<std::vector<double>>> truth(B);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) truth[b].emplace_back(data[b].state_at(t).begin(), data[b].state_at(t).end());
    truth[b].push_back(data[b].terminal_state());
  }
  Rng rng(seed);
  ctrl.reset(B);
  std::vector<std::vector<double>> own(B);
  std::vector<double> err_at(last + 1, 0.0);
  const std::size_t width = data.front().state_stride();
  for (std::size_t t = 0; t < last; ++t) {
    std::vector<double> obs;
    obs.reserve(B * width);
    std::vector<std::vector<double>> fed(B);
    for (std::size_t b = 0; b < B; ++b) {
      fed[b] = t < prefix ? truth[b][t] : own[b];
      std::vector<double> o(fed[b]);
      if (noise_sigma > 0.0) {
        for (auto& v : o) v += rng.normal(0.0, noise_sigma);
      }
      norm.normalize(o);
      obs.insert(obs.end(), o.begin(), o.end());
    }
    const auto actions = ctrl.act(obs);
    const std::size_t astride = actions.size() / B;
    for (std::size_t b = 0; b < B; ++b) {
      own[b] = env.step(fed[b], std::span<const double>(actions.data() + b * astride, astride));
      std::vector<double> p(own[b]);
      std::vector<double> q(truth[b][t + 1]);
      norm.normalize(p);
      norm.normalize(q);
      for (std::size_t k = 0; k < p.size(); ++k) err_at[t + 1] += (p[k] - q[k]) * (p[k] - q[k]);
    }
  }
  std::vector<double> out;
  for (auto h : horizons) out.push_back(err_at[prefix - 1 + h] / static_cast<double>(B * width));
  return out;
}

double slope(const std::vector<std::size_t>& horizons, const std::vector<double>& errors) {
  if (horizons.size() != errors.size() || horizons.size() < 2) throw Error("slope: need >= 2 matched points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    mx += static_cast<double>(horizons[k]);
    my += errors[k];
  }
  mx /= static_cast<double>(horizons.size());
  my /= static_cast<double>(horizons.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    const double dx = static_cast<double>(horizons[k]) - mx;
    sxy += dx * (errors[k] - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error("slope: horizons are all equal");
  return sxy / sxx;
}

std::vector<GridPoint> landscape_grid(const disc::Discriminator& d, const LandscapeSlice& slice, const Region& region,
                                      std::size_t resolution) {
  if (!(region.x1 != region.x0 && region.y1 != region.y0) || !std::isfinite(region.x0) ||
      !std::isfinite(region.x1) || !std::isfinite(region.y0) || !std::isfinite(region.y1)) {
    throw Error("landscape_grid: region has zero area");
  }
  if (resolution < 2) throw Error("landscape_grid: resolution must be >= 2");
  if (slice.state.size() != d.state_width() || slice.action.size() != d.action_width()) {
    throw Error("landscape_grid: base point does not match the discriminator input");
  }
  if (slice.dim_x >= slice.state.size() || slice.dim_y >= slice.state.size() || slice.dim_x == slice.dim_y) {
    throw Error("landscape_grid: invalid slice dimensions");
  }
  const std::size_t n = resolution * resolution;
  std::vector<double> s;
  std::vector<double> a;
  s.reserve(n * slice.state.size());
  a.reserve(n * slice.action.size());
  std::vector<GridPoint> grid(n);
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      auto& p = grid[iy * resolution + ix];
      p.x = region.x0 + (region.x1 - region.x0) * static_cast<double>(ix) / static_cast<double>(resolution - 1);
      p.y = region.y0 + (region.y1 - region.y0) * static_cast<double>(iy) / static_cast<double>(resolution - 1);
      auto row = slice.state;
      row[slice.dim_x] = p.x;
      row[slice.dim_y] = p.y;
      s.insert(s.end(), row.begin(), row.end());
      a.insert(a.end(), slice.action.begin(), slice.action.end());
    }
  }
  ad::NoGradGuard no_grad;
  auto scores = disc::d_forward(d, ad::Tensor({n, slice.state.size()}, std::move(s)),
                                ad::Tensor({n, slice.action.size()}, std::move(a)));
  for (std::size_t k = 0; k < n; ++k) grid[k].score = scores.data()[k];
  return grid;
}

void write_grid_csv(const std::filesystem::path& path, const std::vector<GridPoint>& grid) {
  std::ofstream out(path);
  if (!out) throw Error("write_grid_csv: cannot open '" + path.string() + "'");
  out << "x,y,score\n";
  char buf[96];
  for (const auto& p : grid) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.x, p.y, p.score);
    out << buf;
  }
}

}  // namespace ssmail::trainer
