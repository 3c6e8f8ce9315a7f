#pragma once

#include <cstddef>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/envs/datasets.hpp"
#include "ssmail/envs/environment.hpp"
#include "ssmail/graph_policy/graph_policy.hpp"
#include "ssmail/trainer/replay_buffer.hpp"

namespace ssmail::trainer {

/// Normalized observations of raw joint states [B*N, ds], clipped to +-bound.
ad::Tensor observation_tensor(const envs::Normalizer& norm, const std::vector<std::vector<double>>& raw_states,
                              std::size_t state_dim, double bound);

struct RolloutOptions {
  double forcing_freq = 0.0;
  bool deterministic = false;  // mean action and expected edge weights
  bool record_transitions = true;
};

struct Rollouts {
  std::vector<envs::Trajectory> generated;  // fed states and emitted actions
  std::vector<envs::Trajectory> experts;
  std::vector<std::vector<bool>> forced;  // forced[b][t]: state fed at t+1 came from the expert
  std::vector<Transition> transitions;
};

/// Batched autoregressive episodes, each starting from a sampled expert's
/// first state. Throws if the policy emits NaN.
Rollouts collect_rollouts(const policy::GraphPolicy& pol, const envs::Environment& env, const envs::Normalizer& norm,
                          std::size_t n_episodes, const RolloutOptions& opts, Rng& rng);
Rollouts collect_rollouts_from(const policy::GraphPolicy& pol, const envs::Environment& env,
                               const envs::Normalizer& norm, std::vector<envs::Trajectory> experts,
                               const RolloutOptions& opts, Rng& rng);

/// Replay transitions along fixed trajectories, with encoder memory from
/// running the current encoder over their states.
std::vector<Transition> trajectory_transitions(const policy::GraphPolicy& pol, const envs::Environment& env,
                                               const envs::Normalizer& norm,
                                               const std::vector<envs::Trajectory>& trajs, Source source,
                                               const std::vector<double>& alphas);

/// Closed-loop controller interface for evaluation.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(std::size_t batch) = 0;
  /// obs: normalized [B*N*ds] -> raw actions [B*N*da].
  virtual std::vector<double> act(const std::vector<double>& obs) = 0;
};

class GraphController final : public Controller {
 public:
  GraphController(const policy::GraphPolicy& pol, bool deterministic, std::uint64_t seed);
  void reset(std::size_t batch) override;
  std::vector<double> act(const std::vector<double>& obs) override;

 private:
  const policy::GraphPolicy* pol_;
  bool deterministic_;
  Rng rng_;
  policy::EncoderState state_;
};

}  // namespace ssmail::trainer
