#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ssmail/envs/environment.hpp"

namespace ssmail::envs {

enum class Branch { left = 0, right = 1 };

struct YJunctionConfig {
  std::vector<double> start_y{-2.0, -1.0, 0.0};
  double jitter = 0.1;
  double fork_y = 1.0;
  double branch_angle_deg = 45.0;
  double speed = 1.0;
  std::size_t horizon = 50;
  double dt = 0.1;
  double v_max = 2.0;
};

/// Three agents follow one another up a one-way trunk (x = 0) and then all
/// take the same one of two branches at +-angle from vertical.
class YJunction final : public Environment {
 public:
  explicit YJunction(YJunctionConfig cfg = {});

  const EnvSpec& spec() const override { return spec_; }
  const YJunctionConfig& config() const { return cfg_; }

  /// Trunk positions with uniform jitter in both coordinates.
  std::vector<double> reset(std::uint64_t seed) const;
  std::vector<double> reset(Rng& rng) const;

  /// Constant-speed expert from a jittered start; the branch is drawn
  /// uniformly unless given.
  Trajectory expert(std::uint64_t seed, std::optional<Branch> branch = std::nullopt) const;
  Trajectory expert_from(std::vector<double> start, Branch branch) const;

  Trajectory sample_expert(Rng& rng) const override;
  /// Jitter-free expert for each branch, indexed by Branch.
  std::vector<Trajectory> mode_references() const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<YJunction>(*this); }

  /// Point at arclength `dist` along the path that starts at (x0, y0).
  std::pair<double, double> path_point(double x0, double y0, double dist, Branch branch) const;

 private:
  YJunctionConfig cfg_;
  EnvSpec spec_;
};

}  // namespace ssmail::envs
