#include "ssmail/trainer/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"
#include "ssmail/curriculum/schedule.hpp"

namespace ssmail::trainer {

namespace {

std::vector<double> normalized(const envs::Normalizer& norm, std::span<const double> raw) {
  std::vector<double> v(raw.begin(), raw.end());
  norm.normalize(v);
  return v;
}

std::vector<float> rows_as_float(const ad::Tensor& t, std::size_t first_row, std::size_t rows) {
  const std::size_t w = t.dim(1);
  auto d = t.data();
  return std::vector<float>(d.begin() + first_row * w, d.begin() + (first_row + rows) * w);
}

}  // namespace

ad::Tensor observation_tensor(const envs::Normalizer& norm, const std::vector<std::vector<double>>& raw_states,
                              std::size_t state_dim, double bound) {
  std::vector<double> flat;
  for (const auto& s : raw_states) {
    auto v = normalized(norm, s);
    for (auto& x : v) x = std::clamp(x, -bound, bound);
    flat.insert(flat.end(), v.begin(), v.end());
  }
  const std::size_t rows = flat.size() / state_dim;
  return ad::Tensor({rows, state_dim}, std::move(flat));
}

Rollouts collect_rollouts(const policy::GraphPolicy& pol, const envs::Environment& env, const envs::Normalizer& norm,
                          std::size_t n_episodes, const RolloutOptions& opts, Rng& rng) {
  std::vector<envs::Trajectory> experts;
  experts.reserve(n_episodes);
  for (std::size_t b = 0; b < n_episodes; ++b) experts.push_back(env.sample_expert(rng));
  return collect_rollouts_from(pol, env, norm, std::move(experts), opts, rng);
}

Rollouts collect_rollouts_from(const policy::GraphPolicy& pol, const envs::Environment& env,
                               const envs::Normalizer& norm, std::vector<envs::Trajectory> experts,
                               const RolloutOptions& opts, Rng& rng) {
  const auto& spec = env.spec();
  const auto& pc = pol.config();
  if (pc.agents != spec.agents || pc.state_dim != spec.state_dim || pc.action_dim != spec.action_dim) {
    throw Error("collect_rollouts: policy and environment dimensions differ");
  }
  if (experts.empty()) throw Error("collect_rollouts: no episodes requested");
  const std::size_t B = experts.size();
  const std::size_t T = experts.front().horizon;
  for (const auto& e : experts) {
    if (e.horizon != T || e.agents != spec.agents) throw Error("collect_rollouts: experts differ in shape");
  }
  const std::size_t E = pc.agents * (pc.agents - 1);

  ad::NoGradGuard no_grad;
  Rollouts out;
  out.forced.resize(B);
  std::vector<std::vector<double>> fed(B);
  for (std::size_t b = 0; b < B; ++b) {
    out.forced[b] = curriculum::apply_forcing(T, experts[b].horizon, opts.forcing_freq, rng);
    fed[b].assign(experts[b].state_at(0).begin(), experts[b].state_at(0).end());
    envs::Trajectory g(T, spec.agents, spec.state_dim, spec.action_dim, experts[b].dt);
    out.generated.push_back(std::move(g));
  }

  auto state = pol.initial_state(B);
  for (std::size_t t = 0; t < T; ++t) {
    auto x = observation_tensor(norm, fed, spec.state_dim, pc.obs_bound);
    auto [next, dist] = pol.encode_step(state, x);
    auto z = opts.deterministic ? dist.probs : policy::sample_edges(dist, true, rng);
    auto act = pol.act(x, z, rng, opts.deterministic);
    const auto a = act.action.data();
    const std::size_t stride = spec.agents * spec.action_dim;
    for (std::size_t b = 0; b < B; ++b) {
      std::span<const double> ab(a.data() + b * stride, stride);
      for (double v : ab) {
        if (!std::isfinite(v)) {
          throw Error("collect_rollouts: non-finite action in episode " + std::to_string(b) + " at step " +
                      std::to_string(t));
        }
      }
      auto nxt = env.step(fed[b], ab);
      auto& g = out.generated[b];
      std::copy(fed[b].begin(), fed[b].end(), g.state_at(t).begin());
      std::copy(ab.begin(), ab.end(), g.action_at(t).begin());
      if (opts.record_transitions) {
        Transition tr;
        tr.x = normalized(norm, fed[b]);
        tr.action.assign(ab.begin(), ab.end());
        tr.x_next = normalized(norm, nxt);
        tr.enc_h = rows_as_float(state.h, b * E, E);
        tr.enc_c = rows_as_float(state.c, b * E, E);
        tr.source = Source::generated;
        out.transitions.push_back(std::move(tr));
      }
      if (t + 1 < T && out.forced[b][t]) {
        auto s = experts[b].state_at(t + 1);
        fed[b].assign(s.begin(), s.end());
      } else {
        fed[b] = std::move(nxt);
      }
    }
    state = next;
  }
  out.experts = std::move(experts);
  return out;
}

std::vector<Transition> trajectory_transitions(const policy::GraphPolicy& pol, const envs::Environment& env,
                                               const envs::Normalizer& norm,
                                               const std::vector<envs::Trajectory>& trajs, Source source,
                                               const std::vector<double>& alphas) {
  std::vector<Transition> out;
  if (trajs.empty()) return out;
  if (!alphas.empty() && alphas.size() != trajs.size()) throw Error("trajectory_transitions: alpha count mismatch");
  const auto& pc = pol.config();
  const std::size_t B = trajs.size();
  const std::size_t T = trajs.front().horizon;
  const std::size_t E = pc.agents * (pc.agents - 1);
  for (const auto& tr : trajs) {
    if (tr.horizon != T || tr.agents != pc.agents || tr.state_dim != pc.state_dim) {
      throw Error("trajectory_transitions: trajectories differ in shape");
    }
  }
  ad::NoGradGuard no_grad;
  auto state = pol.initial_state(B);
  std::vector<std::vector<Transition>> per(B);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::vector<double>> raw(B);
    for (std::size_t b = 0; b < B; ++b) raw[b].assign(trajs[b].state_at(t).begin(), trajs[b].state_at(t).end());
    auto x = observation_tensor(norm, raw, pc.state_dim, pc.obs_bound);
    for (std::size_t b = 0; b < B; ++b) {
      Transition tr;
      tr.x = normalized(norm, raw[b]);
      auto a = trajs[b].action_at(t);
      tr.action.resize(a.size());
      for (std::size_t k = 0; k < a.size(); ++k) tr.action[k] = std::clamp(a[k], -env.spec().v_max, env.spec().v_max);
      tr.x_next = normalized(norm, env.step(raw[b], a));
      tr.enc_h = rows_as_float(state.h, b * E, E);
      tr.enc_c = rows_as_float(state.c, b * E, E);
      tr.source = source;
      tr.alpha = alphas.empty() ? 0.0 : alphas[b];
      per[b].push_back(std::move(tr));
    }
    state = pol.encode_step(state, x).first;
  }
  for (auto& v : per) {
    for (auto& tr : v) out.push_back(std::move(tr));
  }
  return out;
}

GraphController::GraphController(const policy::GraphPolicy& pol, bool deterministic, std::uint64_t seed)
    : pol_(&pol), deterministic_(deterministic), rng_(seed) {}

void GraphController::reset(std::size_t batch) { state_ = pol_->initial_state(batch); }

std::vector<double> GraphController::act(const std::vector<double>& obs) {
  ad::NoGradGuard no_grad;
  const auto& pc = pol_->config();
  std::vector<double> clipped(obs);
  for (auto& v : clipped) v = std::clamp(v, -pc.obs_bound, pc.obs_bound);
  const std::size_t rows = clipped.size() / pc.state_dim;
  ad::Tensor x({rows, pc.state_dim}, std::move(clipped));
  auto [next, dist] = pol_->encode_step(state_, x);
  auto z = deterministic_ ? dist.probs : policy::sample_edges(dist, true, rng_);
  auto out = pol_->act(x, z, rng_, deterministic_);
  state_ = next;
  return out.action.values();
}

}  // namespace ssmail::trainer
