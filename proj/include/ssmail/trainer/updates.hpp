#pragma once

#include <cstddef>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/discriminator/discriminator.hpp"
#include "ssmail/envs/datasets.hpp"
#include "ssmail/graph_policy/graph_policy.hpp"
#include "ssmail/nn/adam.hpp"
#include "ssmail/trainer/config.hpp"
#include "ssmail/trainer/replay_buffer.hpp"

namespace ssmail::trainer {

/// k_steps Adam updates on the configured objective. Each step draws
/// `pairs` generated/expert pairs (same index) and a fresh alpha per pair.
/// Trajectories must already be in discriminator units (Normalizer::apply).
std::vector<double> discriminator_epoch(disc::Discriminator& d, nn::AdamState& opt,
                                        const std::vector<envs::Trajectory>& generated,
                                        const std::vector<envs::Trajectory>& experts, disc::AlphaSampler& sampler,
                                        std::size_t k_steps, std::size_t pairs, Rng& rng);

/// Tensors for one SAC minibatch.
struct SacBatch {
  std::size_t size = 0;
  ad::Tensor x;       // clipped observations [b*N, ds]
  ad::Tensor x_next;  // [b*N, ds]
  ad::Tensor action;  // raw [b*N, da]
  policy::EncoderState enc;
  ad::Tensor disc_states;   // [b, N*ds]
  ad::Tensor disc_actions;  // [b, N*da], actions over the state scale
  ad::Tensor not_done;      // [b, 1]
};

SacBatch make_sac_batch(const std::vector<const Transition*>& items, const policy::PolicyConfig& cfg,
                        const envs::Normalizer& norm);

/// y = r + gamma * (1 - done) * (q_target - entropy * log_pi).
double sac_target(double reward, double gamma, double q_target, double log_pi, double entropy, bool done);

/// Mean over agents of per-agent log-probabilities: [b*N, 1] -> [b, 1].
ad::Tensor joint_log_prob(const ad::Tensor& per_agent, std::size_t agents);

/// Elementwise min of two equally shaped tensors.
ad::Tensor minimum(const ad::Tensor& a, const ad::Tensor& b);

/// Twin-critic regression loss; targets are built without recording.
ad::Tensor critic_loss(const policy::GraphPolicy& pol, const policy::CriticPair& critics,
                       const disc::Discriminator& d, const SacBatch& batch, const SACConfig& cfg, Rng& rng);

/// mean(entropy * log pi(a~|s) - min_k Q_k(s, z, a~)), differentiable in the
/// actor and encoder; z enters the critic detached.
ad::Tensor actor_loss(const policy::GraphPolicy& pol, const policy::CriticPair& critics, const SacBatch& batch,
                      double entropy, Rng& rng,
                      policy::PolicyOutput* sampled = nullptr);

struct SacOptimizers {
  nn::AdamState encoder;
  nn::AdamState actor;
  nn::AdamState critic[2];

  SacOptimizers() = default;
  explicit SacOptimizers(const SACConfig& cfg);
};

struct SacStats {
  bool skipped = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_reward = 0.0;
  double mean_abs_mu = 0.0;  // pre-squash mean of the actor's sampled actions
  double mean_sigma = 0.0;
};

/// Critic step, actor step, then polyak averaging of the targets. Rewards
/// come from the discriminator as it is now. Skips when the buffer holds
/// fewer than batch transitions.
SacStats sac_update(policy::GraphPolicy& pol, policy::CriticPair& critics, SacOptimizers& opt,
                    const ReplayBuffer& buffer, const disc::Discriminator& d, const envs::Normalizer& norm,
                    const SACConfig& cfg, Rng& rng);

/// Differentiable clip to [-bound, bound].
ad::Tensor clip(const ad::Tensor& x, double bound);

/// Multi-step next-state regression in normalized units with the mean
/// action and expected edge weights. With probability forcing_freq per step
/// the next fed state is the data's instead of the prediction.
ad::Tensor bc_loss(const policy::GraphPolicy& pol, const envs::Normalizer& norm,
                   const std::vector<envs::Trajectory>& experts, double forcing_freq, Rng& rng);

}  // namespace ssmail::trainer
