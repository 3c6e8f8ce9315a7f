#include "ssmail/envs/environment.hpp"

#include <algorithm>
#include <cmath>

#include "ssmail/common/error.hpp"

namespace ssmail::envs {

std::vector<double> Environment::step(std::span<const double> states, std::span<const double> actions) const {
  const auto& sp = spec();
  if (sp.state_dim != sp.action_dim) throw Error("Environment::step: integrator needs equal state/action dims");
  if (states.size() != sp.agents * sp.state_dim || actions.size() != states.size()) {
    throw Error("Environment::step: expected " + std::to_string(sp.agents * sp.state_dim) + " values");
  }
  std::vector<double> next(states.begin(), states.end());
  for (std::size_t k = 0; k < next.size(); ++k) {
    if (std::isnan(actions[k])) throw Error("Environment::step: NaN action");
    next[k] += std::clamp(actions[k], -sp.v_max, sp.v_max) * sp.dt;
  }
  return next;
}

}  // namespace ssmail::envs
