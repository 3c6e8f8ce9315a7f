#include "ssmail/trainer/updates.hpp"

#include <algorithm>
#include <cmath>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"
#include "ssmail/curriculum/schedule.hpp"

namespace ssmail::trainer {

std::vector<double> discriminator_epoch(disc::Discriminator& d, nn::AdamState& opt,
                                        const std::vector<envs::Trajectory>& generated,
                                        const std::vector<envs::Trajectory>& experts, disc::AlphaSampler& sampler,
                                        std::size_t k_steps, std::size_t pairs, Rng& rng) {
  if (generated.empty() || experts.empty()) throw Error("discriminator_epoch: empty trajectory set");
  if (generated.size() != experts.size()) throw Error("discriminator_epoch: generated and expert sets must pair up");
  if (pairs == 0) throw Error("discriminator_epoch: pairs must be positive");
  std::vector<double> trace;
  trace.reserve(k_steps);
  for (std::size_t step = 0; step < k_steps; ++step) {
    std::vector<envs::Trajectory> g;
    std::vector<envs::Trajectory> e;
    std::vector<disc::InterpolatedBatch> mix;
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = rng.index(generated.size());
      g.push_back(generated[i]);
      e.push_back(experts[i]);
      mix.push_back(disc::interpolate(generated[i], experts[i], sampler.sample()));
    }
    ad::Tape tape;
    d.params().zero_grad();
    auto loss = disc::objective_loss(d, disc::make_batch(g), disc::make_batch(e), disc::make_batch(mix), rng);
    tape.backward(loss);
    nn::adam_step(opt, d.params());
    trace.push_back(loss.item());
  }
  return trace;
}

SacBatch make_sac_batch(const std::vector<const Transition*>& items, const policy::PolicyConfig& cfg,
                        const envs::Normalizer& norm) {
  if (items.empty()) throw Error("make_sac_batch: empty batch");
  const std::size_t b = items.size();
  const std::size_t N = cfg.agents;
  const std::size_t E = N * (N - 1);
  const std::size_t sw = N * cfg.state_dim;
  const std::size_t aw = N * cfg.action_dim;
  const std::size_t hw = E * cfg.hidden;
  std::vector<double> x, xn, xu, a, ad_, h, c, nd;
  x.reserve(b * sw);
  xn.reserve(b * sw);
  xu.reserve(b * sw);
  a.reserve(b * aw);
  ad_.reserve(b * aw);
  h.reserve(b * hw);
  c.reserve(b * hw);
  const double bound = cfg.obs_bound;
  for (const auto* t : items) {
    if (t->x.size() != sw || t->x_next.size() != sw || t->action.size() != aw || t->enc_h.size() != hw ||
        t->enc_c.size() != hw) {
      throw Error("make_sac_batch: transition does not match the policy configuration");
    }
    for (double v : t->x) x.push_back(std::clamp(v, -bound, bound));
    for (double v : t->x_next) xn.push_back(std::clamp(v, -bound, bound));
    xu.insert(xu.end(), t->x.begin(), t->x.end());
    a.insert(a.end(), t->action.begin(), t->action.end());
    for (std::size_t k = 0; k < aw; ++k) ad_.push_back(t->action[k] / norm.scale(k % cfg.action_dim));
    h.insert(h.end(), t->enc_h.begin(), t->enc_h.end());
    c.insert(c.end(), t->enc_c.begin(), t->enc_c.end());
    nd.push_back(t->done ? 0.0 : 1.0);
  }
  SacBatch out;
  out.size = b;
  out.x = ad::Tensor({b * N, cfg.state_dim}, std::move(x));
  out.x_next = ad::Tensor({b * N, cfg.state_dim}, std::move(xn));
  out.action = ad::Tensor({b * N, cfg.action_dim}, std::move(a));
  out.enc.h = ad::Tensor({b * E, cfg.hidden}, std::move(h));
  out.enc.c = ad::Tensor({b * E, cfg.hidden}, std::move(c));
  out.disc_states = ad::Tensor({b, sw}, std::move(xu));
  out.disc_actions = ad::Tensor({b, aw}, std::move(ad_));
  out.not_done = ad::Tensor({b, 1}, std::move(nd));
  return out;
}

double sac_target(double reward, double gamma, double q_target, double log_pi, double entropy, bool done) {
  return reward + (done ? 0.0 : gamma * (q_target - entropy * log_pi));
}

ad::Tensor joint_log_prob(const ad::Tensor& per_agent, std::size_t agents) {
  const std::size_t b = per_agent.dim(0) / agents;
  return ad::reshape(ad::mean(ad::reshape(per_agent, {b, agents}), 1), {b, 1});
}

ad::Tensor minimum(const ad::Tensor& a, const ad::Tensor& b) { return ad::sub(a, ad::relu(ad::sub(a, b))); }

ad::Tensor critic_loss(const policy::GraphPolicy& pol, const policy::CriticPair& critics,
                       const disc::Discriminator& d, const SacBatch& batch, const SACConfig& cfg, Rng& rng) {
  const std::size_t N = pol.config().agents;
  ad::Tensor z;
  ad::Tensor y;
  {
    ad::NoGradGuard no_grad;
    auto [post, dist] = pol.encode_step(batch.enc, batch.x);
    z = policy::sample_edges(dist, true, rng);
    auto next_dist = pol.encode_step(post, batch.x_next).second;
    auto z_next = policy::sample_edges(next_dist, true, rng);
    auto next = pol.act(batch.x_next, z_next, rng);
    auto q_next = minimum(critics.net.q(critics.target[0], batch.x_next, z_next, next.action),
                          critics.net.q(critics.target[1], batch.x_next, z_next, next.action));
    auto soft = ad::sub(q_next, ad::scale(joint_log_prob(next.log_prob, N), cfg.entropy));
    auto r = disc::reward(d, batch.disc_states, batch.disc_actions);
    ad::Tensor rt({batch.size, 1}, std::move(r));
    y = ad::add(rt, ad::scale(ad::mul(batch.not_done, soft), cfg.gamma));
  }
  auto q1 = critics.net.q(critics.online[0], batch.x, z, batch.action);
  auto q2 = critics.net.q(critics.online[1], batch.x, z, batch.action);
  return ad::add(ad::mean(ad::square(ad::sub(q1, y))), ad::mean(ad::square(ad::sub(q2, y))));
}

ad::Tensor actor_loss(const policy::GraphPolicy& pol, const policy::CriticPair& critics, const SacBatch& batch,
                      double entropy, Rng& rng, policy::PolicyOutput* sampled) {
  auto dist = pol.encode_step(batch.enc, batch.x).second;
  auto z = policy::sample_edges(dist, true, rng);
  auto out = pol.act(batch.x, z, rng);
  if (sampled) *sampled = out;
  auto zc = z.detach();
  auto q = minimum(critics.net.q(critics.online[0], batch.x, zc, out.action),
                   critics.net.q(critics.online[1], batch.x, zc, out.action));
  return ad::mean(ad::sub(ad::scale(joint_log_prob(out.log_prob, pol.config().agents), entropy), q));
}

SacOptimizers::SacOptimizers(const SACConfig& cfg)
    : encoder(nn::AdamConfig{cfg.actor_lr}),
      actor(nn::AdamConfig{cfg.actor_lr}),
      critic{nn::AdamState(nn::AdamConfig{cfg.critic_lr}), nn::AdamState(nn::AdamConfig{cfg.critic_lr})} {}

SacStats sac_update(policy::GraphPolicy& pol, policy::CriticPair& critics, SacOptimizers& opt,
                    const ReplayBuffer& buffer, const disc::Discriminator& d, const envs::Normalizer& norm,
                    const SACConfig& cfg, Rng& rng) {
  SacStats stats;
  if (buffer.size() < cfg.batch) {
    stats.skipped = true;
    return stats;
  }
  auto batch = make_sac_batch(buffer.sample(cfg.batch, rng), pol.config(), norm);
  {
    ad::Tape tape;
    critics.online[0].zero_grad();
    critics.online[1].zero_grad();
    auto loss = critic_loss(pol, critics, d, batch, cfg, rng);
    tape.backward(loss);
    nn::adam_step(opt.critic[0], critics.online[0]);
    nn::adam_step(opt.critic[1], critics.online[1]);
    stats.critic_loss = loss.item();
  }
  {
    ad::Tape tape;
    pol.encoder_params().zero_grad();
    pol.actor_params().zero_grad();
    policy::PolicyOutput out;
    auto loss = actor_loss(pol, critics, batch, cfg.entropy, rng, &out);
    tape.backward(loss);
    for (double v : out.mu.data()) stats.mean_abs_mu += std::abs(v);
    for (double v : out.sigma.data()) stats.mean_sigma += v;
    stats.mean_abs_mu /= static_cast<double>(out.mu.numel());
    stats.mean_sigma /= static_cast<double>(out.sigma.numel());
    nn::adam_step(opt.encoder, pol.encoder_params());
    nn::adam_step(opt.actor, pol.actor_params());
    stats.actor_loss = loss.item();
  }
  critics.online[0].zero_grad();
  critics.online[1].zero_grad();
  policy::polyak_update(critics);
  {
    ad::NoGradGuard no_grad;
    auto r = disc::reward(d, batch.disc_states, batch.disc_actions);
    double s = 0.0;
    for (double v : r) s += v;
    stats.mean_reward = s / static_cast<double>(r.size());
  }
  return stats;
}

ad::Tensor clip(const ad::Tensor& x, double bound) {
  return ad::add(ad::sub(x, ad::relu(ad::add_scalar(x, -bound))), ad::relu(ad::add_scalar(ad::neg(x), -bound)));
}

ad::Tensor bc_loss(const policy::GraphPolicy& pol, const envs::Normalizer& norm,
                   const std::vector<envs::Trajectory>& experts, double forcing_freq, Rng& rng) {
  if (experts.empty()) throw Error("bc_loss: empty dataset");
  const auto& pc = pol.config();
  const std::size_t B = experts.size();
  const std::size_t T = experts.front().horizon;
  const std::size_t N = pc.agents;
  const std::size_t ds = pc.state_dim;
  if (pc.action_dim != ds) throw Error("bc_loss: integrator dynamics need action_dim == state_dim");
  std::vector<std::vector<double>> truth(T + 1);
  for (const auto& e : experts) {
    if (e.horizon != T || e.agents != N || e.state_dim != ds) throw Error("bc_loss: trajectories differ in shape");
  }
  for (std::size_t t = 0; t <= T; ++t) {
    for (const auto& e : experts) {
      std::vector<double> s = t < T ? std::vector<double>(e.state_at(t).begin(), e.state_at(t).end())
                                    : e.terminal_state();
      norm.normalize(s);
      truth[t].insert(truth[t].end(), s.begin(), s.end());
    }
  }
  std::vector<std::vector<bool>> forced(B);
  for (std::size_t b = 0; b < B; ++b) forced[b] = curriculum::apply_forcing(T, T, forcing_freq, rng);
  std::vector<double> step_scale(ds);
  for (std::size_t k = 0; k < ds; ++k) step_scale[k] = experts.front().dt / norm.scale(k);
  const ad::Tensor to_norm({ds}, step_scale);

  auto fed = ad::Tensor({B * N, ds}, truth[0]);
  auto state = pol.initial_state(B);
  ad::Tensor total;
  for (std::size_t t = 0; t < T; ++t) {
    auto x = clip(fed, pc.obs_bound);
    auto [next, dist] = pol.encode_step(state, x);
    auto out = pol.act(x, dist.probs, rng, true);
    auto pred = ad::add(fed, ad::mul(out.action, to_norm));
    ad::Tensor target({B * N, ds}, truth[t + 1]);
    auto err = ad::mean(ad::square(ad::sub(pred, target)));
    total = total.defined() ? ad::add(total, err) : err;
    std::vector<double> keep(B * N);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < N; ++i) keep[b * N + i] = forced[b][t] ? 0.0 : 1.0;
    }
    ad::Tensor keep_t({B * N, 1}, keep);
    for (auto& v : keep) v = 1.0 - v;
    ad::Tensor take_t({B * N, 1}, keep);
    fed = ad::add(ad::scale_rows(pred, keep_t), ad::scale_rows(target, take_t));
    state = next;
  }
  return ad::scale(total, 1.0 / static_cast<double>(T));
}

}  // namespace ssmail::trainer
