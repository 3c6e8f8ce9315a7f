#include "ssmail/nn/adam.hpp"

#include <algorithm>
#include <cmath>

#include "ssmail/common/error.hpp"

namespace ssmail::nn {

void adam_step(AdamState& state, ParameterSet& params) {
  for (auto& [name, p] : params) {
    if (!p.has_grad()) throw Error("adam_step: parameter '" + name + "' has no gradient");
  }
  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.numel()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    auto w = p.mutable_data();
    auto g = p.mutable_grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      w[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
    std::fill(g.begin(), g.end(), 0.0);
  }
}

}  // namespace ssmail::nn
