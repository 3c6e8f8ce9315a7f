#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/envs/trajectory.hpp"
#include "ssmail/nn/layers.hpp"
#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::disc {

enum class Objective { ss_mse, gail_bce, wasserstein };
enum class AlphaMode { positive_unit, symmetric, extended };

Objective parse_objective(const std::string& name);
std::string to_string(Objective o);
AlphaMode parse_alpha_mode(const std::string& name);
std::string to_string(AlphaMode m);

/// Draws alpha uniformly from [0,1], [-1,1] or [-1,1.5].
class AlphaSampler {
 public:
  AlphaSampler(AlphaMode mode, std::uint64_t seed);

  AlphaMode mode() const { return mode_; }
  double lo() const;
  double hi() const;
  double sample();

 private:
  AlphaMode mode_;
  Rng rng_;
};

/// Regression target for an interpolated sample: alpha up to the expert,
/// zero past it.
double ss_label(double alpha);

struct InterpolatedBatch {
  double alpha = 0.0;
  envs::Trajectory traj;
  double label = 0.0;
};

/// (1 - alpha) * gen + alpha * expert, pointwise on states and actions.
/// The expert is truncated to the generated horizon when longer.
InterpolatedBatch interpolate(const envs::Trajectory& gen, const envs::Trajectory& expert, double alpha);

/// Rows of joint (state, action) samples: states [B, N*ds], actions [B, N*da].
struct SABatch {
  ad::Tensor states;
  ad::Tensor actions;
  std::vector<double> labels;  // one per row; used by the interpolated term only

  std::size_t size() const { return states.defined() ? states.dim(0) : 0; }
};

/// Every timestep of every trajectory becomes one row; `labels` repeats
/// each trajectory's label over its timesteps when given.
SABatch make_batch(const std::vector<envs::Trajectory>& trajs, const std::vector<double>& labels = {});
SABatch make_batch(const std::vector<InterpolatedBatch>& interps);

struct DiscConfig {
  Objective objective = Objective::ss_mse;
  std::vector<std::size_t> hidden{64, 64};
  double gp_coeff = 10.0;
};

/// Centralized D(s, a) over the concatenated joint state and action.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(DiscConfig cfg, std::size_t state_width, std::size_t action_width, Rng& rng);

  const DiscConfig& config() const { return cfg_; }
  const nn::MlpSpec& spec() const { return spec_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  std::size_t state_width() const { return state_width_; }
  std::size_t action_width() const { return action_width_; }

 private:
  DiscConfig cfg_;
  nn::MlpSpec spec_;
  nn::ParameterSet params_;
  std::size_t state_width_ = 0;
  std::size_t action_width_ = 0;
};

/// Pre-activation score [B, 1].
ad::Tensor d_logits(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a);
/// Score [B, 1]: linear for ss_mse/wasserstein, sigmoid for gail_bce. Throws on NaN.
ad::Tensor d_forward(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a);

/// mean(D(gen)^2) + mean((1 - D(exp))^2) + mean((label - D(interp))^2).
ad::Tensor ss_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, const SABatch& interp);

/// -(mean log D(gen) + mean log(1 - D(exp))), evaluated from logits.
ad::Tensor gail_bce_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp);
/// The maximand of the GAIL objective for given probabilities; throws if any lies outside (0, 1).
double gail_objective(const std::vector<double>& d_gen, const std::vector<double>& d_exp);

/// mean D(gen) - mean D(exp) + gp * mean((||grad_x D(x_hat)|| - 1)^2) on
/// random interpolates x_hat between paired gen/exp rows.
ad::Tensor wasserstein_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, double gp_coeff,
                            Rng& rng);

/// Input gradient dD/d[s, a] as a differentiable tensor [B, in].
ad::Tensor input_gradient(const Discriminator& d, const ad::Tensor& x);

/// Per-row reward from the current parameters: D for ss_mse and
/// wasserstein, -log D for gail_bce (generated is labelled 1 there).
std::vector<double> reward(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a);

ad::Tensor objective_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, const SABatch& interp,
                          Rng& rng);

}  // namespace ssmail::disc
