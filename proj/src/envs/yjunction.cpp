#include "ssmail/envs/yjunction.hpp"

#include <cmath>
#include <numbers>

#include "ssmail/common/error.hpp"

namespace ssmail::envs {

YJunction::YJunction(YJunctionConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.start_y.size() < 2) throw ConfigError("YJunction: needs at least two agents");
  for (std::size_t i = 1; i < cfg_.start_y.size(); ++i) {
    if (cfg_.start_y[i] - cfg_.start_y[i - 1] <= 2 * cfg_.jitter) {
      throw ConfigError("YJunction: start rows must be separated by more than twice the jitter");
    }
  }
  if (cfg_.speed <= 0.0 || cfg_.speed > cfg_.v_max) {
    throw ConfigError("YJunction: expert speed must lie in (0, v_max]");
  }
  spec_ = EnvSpec{cfg_.start_y.size(), 2, 2, cfg_.horizon, cfg_.dt, cfg_.v_max};
}

std::vector<double> YJunction::reset(std::uint64_t seed) const {
  Rng rng(seed);
  return reset(rng);
}

std::vector<double> YJunction::reset(Rng& rng) const {
  std::vector<double> s;
  s.reserve(2 * cfg_.start_y.size());
  for (double y : cfg_.start_y) {
    s.push_back(rng.uniform(-cfg_.jitter, cfg_.jitter));
    s.push_back(y + rng.uniform(-cfg_.jitter, cfg_.jitter));
  }
  return s;
}

std::pair<double, double> YJunction::path_point(double x0, double y0, double dist, Branch branch) const {
  const double trunk = std::max(0.0, cfg_.fork_y - y0);
  if (dist <= trunk) return {x0, y0 + dist};
  const double theta = cfg_.branch_angle_deg * std::numbers::pi / 180.0;
  const double sign = branch == Branch::left ? -1.0 : 1.0;
  const double rest = dist - trunk;
  return {x0 + sign * std::sin(theta) * rest, y0 + trunk + std::cos(theta) * rest};
}

Trajectory YJunction::expert_from(std::vector<double> start, Branch branch) const {
  const std::size_t n = spec_.agents;
  if (start.size() != 2 * n) throw Error("YJunction::expert_from: bad start state size");
  Trajectory tr(cfg_.horizon, n, 2, 2, cfg_.dt);
  const double step_len = cfg_.speed * cfg_.dt;
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = start[2 * i];
    const double y0 = start[2 * i + 1];
    auto prev = path_point(x0, y0, 0.0, branch);
    for (std::size_t t = 0; t < cfg_.horizon; ++t) {
      auto next = path_point(x0, y0, step_len * static_cast<double>(t + 1), branch);
      tr.s(t, i, 0) = prev.first;
      tr.s(t, i, 1) = prev.second;
      tr.a(t, i, 0) = (next.first - prev.first) / cfg_.dt;
      tr.a(t, i, 1) = (next.second - prev.second) / cfg_.dt;
      prev = next;
    }
  }
  tr.mode = static_cast<int>(branch);
  return tr;
}

Trajectory YJunction::expert(std::uint64_t seed, std::optional<Branch> branch) const {
  Rng rng(seed);
  auto start = reset(rng);
  const Branch b = branch ? *branch : (rng.bernoulli(0.5) ? Branch::left : Branch::right);
  return expert_from(std::move(start), b);
}

Trajectory YJunction::sample_expert(Rng& rng) const {
  auto start = reset(rng);
  const Branch b = rng.bernoulli(0.5) ? Branch::left : Branch::right;
  return expert_from(std::move(start), b);
}

std::vector<Trajectory> YJunction::mode_references() const {
  std::vector<double> start;
  for (double y : cfg_.start_y) {
    start.push_back(0.0);
    start.push_back(y);
  }
  return {expert_from(start, Branch::left), expert_from(start, Branch::right)};
}

}  // namespace ssmail::envs
