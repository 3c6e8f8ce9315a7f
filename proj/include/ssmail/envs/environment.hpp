#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ssmail/common/rng.hpp"
#include "ssmail/envs/trajectory.hpp"

namespace ssmail::envs {

struct EnvSpec {
  std::size_t agents = 3;
  std::size_t state_dim = 2;
  std::size_t action_dim = 2;
  std::size_t horizon = 50;
  double dt = 0.1;
  double v_max = 2.0;
};

/// Planar single-integrator world: s' = s + clip(a, v_max) * dt per component.
/// Episodes start from the initial state of a sampled expert so that teacher
/// forcing has an aligned reference.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Trajectory sample_expert(Rng& rng) const = 0;
  /// Canonical per-mode references used by the training error; may be empty.
  virtual std::vector<Trajectory> mode_references() const { return {}; }
  virtual std::unique_ptr<Environment> clone() const = 0;

  /// Throws on NaN actions; clips to the action bound.
  std::vector<double> step(std::span<const double> states, std::span<const double> actions) const;
};

}  // namespace ssmail::envs
