#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ssmail::envs {

/// One episode of joint multi-agent states and actions, row-major [T, N, dim].
/// Under the integrator dynamics s_(t+1) = s_t + a_t * dt, the state after
/// the last action is implied rather than stored.
struct Trajectory {
  std::size_t horizon = 0;
  std::size_t agents = 0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  double dt = 0.1;
  std::vector<double> states;
  std::vector<double> actions;
  std::optional<int> mode;

  Trajectory() = default;
  Trajectory(std::size_t T, std::size_t N, std::size_t ds, std::size_t da, double dt = 0.1);

  std::size_t state_stride() const { return agents * state_dim; }
  std::size_t action_stride() const { return agents * action_dim; }

  double& s(std::size_t t, std::size_t i, std::size_t k) { return states[(t * agents + i) * state_dim + k]; }
  double s(std::size_t t, std::size_t i, std::size_t k) const { return states[(t * agents + i) * state_dim + k]; }
  double& a(std::size_t t, std::size_t i, std::size_t k) { return actions[(t * agents + i) * action_dim + k]; }
  double a(std::size_t t, std::size_t i, std::size_t k) const { return actions[(t * agents + i) * action_dim + k]; }

  std::span<double> state_at(std::size_t t) { return {states.data() + t * state_stride(), state_stride()}; }
  std::span<const double> state_at(std::size_t t) const { return {states.data() + t * state_stride(), state_stride()}; }
  std::span<double> action_at(std::size_t t) { return {actions.data() + t * action_stride(), action_stride()}; }
  std::span<const double> action_at(std::size_t t) const {
    return {actions.data() + t * action_stride(), action_stride()};
  }

  /// State reached by the last action; requires state_dim == action_dim.
  std::vector<double> terminal_state() const;

  /// Throws on size mismatches, empty horizon or non-finite values.
  void validate() const;
};

}  // namespace ssmail::envs
