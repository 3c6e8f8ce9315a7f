#pragma once

#include <cstddef>
#include <string>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/nn/layers.hpp"
#include "ssmail/nn/message_passing.hpp"
#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::policy {

struct PolicyConfig {
  std::size_t agents = 3;
  std::size_t state_dim = 2;
  std::size_t action_dim = 2;
  std::size_t edge_types = 2;  // type 0 carries no message
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  double temperature = 0.5;
  double sigma_min = 1e-3;
  double v_max = 2.0;
  double obs_bound = 1.5;  // normalized observations beyond this are rejected
};

/// Per-pair LSTM memory, rows follow nn::PairIndex edge order.
struct EncoderState {
  ad::Tensor h;  // [B*E, hidden]
  ad::Tensor c;
};

/// Edge-type distribution per ordered pair: logits and probs are [B*E, K].
struct InteractionGraphSample {
  ad::Tensor logits;
  ad::Tensor probs;
  double temperature = 0.5;
};

/// Rows are agents, [B*N, ...]; log_prob is per agent, [B*N, 1].
struct PolicyOutput {
  ad::Tensor mu;
  ad::Tensor sigma;
  ad::Tensor pre_squash;
  ad::Tensor action;
  ad::Tensor log_prob;
};

/// Graph encoder (NRI-style) plus G-SAC actor sharing one configuration.
/// Encoder parameters live under "enc.", actor parameters under "actor.".
class GraphPolicy {
 public:
  GraphPolicy() = default;
  GraphPolicy(PolicyConfig cfg, Rng& rng);

  const PolicyConfig& config() const { return cfg_; }
  nn::ParameterSet& encoder_params() { return enc_; }
  const nn::ParameterSet& encoder_params() const { return enc_; }
  nn::ParameterSet& actor_params() { return actor_; }
  const nn::ParameterSet& actor_params() const { return actor_; }

  nn::PairIndex graph(std::size_t batch) const { return nn::PairIndex(cfg_.agents, batch); }
  EncoderState initial_state(std::size_t batch) const;

  /// One message-passing round over x_t [B*N, d_s], an LSTM update per pair
  /// and a softmax over edge types.
  std::pair<EncoderState, InteractionGraphSample> encode_step(const EncoderState& state, const ad::Tensor& x) const;

  /// mu_j = f_mu(sum_i h_ij), sigma_j = softplus(f_sigma(.)) + sigma_min,
  /// action = v_max * tanh(mu + sigma * eps). With `deterministic`, eps = 0.
  PolicyOutput act(const ad::Tensor& x, const ad::Tensor& z, Rng& rng, bool deterministic = false) const;

  /// Sum over edge types k >= 1 of z_k * f_e^k([x_i, x_j]), aggregated at receivers.
  ad::Tensor aggregate_messages(const ad::Tensor& x, const ad::Tensor& z) const;

  std::size_t batch_of(const ad::Tensor& x) const;

 private:
  PolicyConfig cfg_;
  nn::ParameterSet enc_;
  nn::ParameterSet actor_;
  nn::MlpSpec enc_e1_;
  nn::MlpSpec enc_v_;
  nn::MlpSpec enc_e2_;
  nn::LstmSpec enc_lstm_;
  nn::MlpSpec enc_out_;
  std::vector<nn::MlpSpec> msg_;  // one per non-null edge type
  nn::MlpSpec mu_;
  nn::MlpSpec sigma_;
};

/// Relaxed Gumbel-softmax sample [B*E, K]. With `hard`, the forward value is
/// the one-hot argmax and the gradient is that of the relaxed sample.
ad::Tensor sample_edges(const InteractionGraphSample& dist, bool hard, Rng& rng);

/// Mean-pooled joint Q over per-agent heads fed by z-weighted pair messages
/// on [x_i, a_i, x_j, a_j]. Parameters are passed separately so that online
/// and target copies share one network description.
class CriticNet {
 public:
  CriticNet() = default;
  explicit CriticNet(const PolicyConfig& cfg);

  const PolicyConfig& config() const { return cfg_; }
  void init(nn::ParameterSet& params, Rng& rng) const;

  /// Per-agent heads [B*N, 1].
  ad::Tensor per_agent(const nn::ParameterSet& params, const ad::Tensor& x, const ad::Tensor& z,
                       const ad::Tensor& a) const;
  /// Joint Q [B, 1].
  ad::Tensor q(const nn::ParameterSet& params, const ad::Tensor& x, const ad::Tensor& z, const ad::Tensor& a) const;

 private:
  PolicyConfig cfg_;
  std::vector<nn::MlpSpec> msg_;
  nn::MlpSpec head_;
};

/// Twin online critics with polyak-averaged targets.
struct CriticPair {
  CriticNet net;
  nn::ParameterSet online[2];
  nn::ParameterSet target[2];
  double polyak_rho = 0.995;

  CriticPair() = default;
  CriticPair(const PolicyConfig& cfg, double rho, Rng& rng);
};

/// target <- rho * target + (1 - rho) * online, elementwise.
void polyak_update(nn::ParameterSet& target, const nn::ParameterSet& online, double rho);
void polyak_update(CriticPair& pair);

}  // namespace ssmail::policy
