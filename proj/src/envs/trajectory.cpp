#include "ssmail/envs/trajectory.hpp"

#include <cmath>
#include <string>

#include "ssmail/common/error.hpp"

namespace ssmail::envs {

Trajectory::Trajectory(std::size_t T, std::size_t N, std::size_t ds, std::size_t da, double dt_)
    : horizon(T), agents(N), state_dim(ds), action_dim(da), dt(dt_), states(T * N * ds, 0.0), actions(T * N * da, 0.0) {}

std::vector<double> Trajectory::terminal_state() const {
  if (state_dim != action_dim) throw Error("Trajectory: terminal state needs equal state and action dims");
  std::vector<double> out(state_stride());
  const auto s_last = state_at(horizon - 1);
  const auto a_last = action_at(horizon - 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = s_last[k] + a_last[k] * dt;
  return out;
}

void Trajectory::validate() const {
  if (horizon == 0 || agents == 0 || state_dim == 0) throw Error("Trajectory: empty dimensions");
  if (states.size() != horizon * agents * state_dim) throw Error("Trajectory: state buffer size mismatch");
  if (actions.size() != horizon * agents * action_dim) throw Error("Trajectory: action buffer size mismatch");
  for (double x : states) {
    if (!std::isfinite(x)) throw Error("Trajectory: non-finite state value");
  }
  for (double x : actions) {
    if (!std::isfinite(x)) throw Error("Trajectory: non-finite action value");
  }
}

}  // namespace ssmail::envs
