#include "ssmail/graph_policy/graph_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::policy {

namespace {

std::vector<std::size_t> stack(std::size_t in, std::size_t width, std::size_t hidden_layers, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden_layers, width);
  sizes.push_back(out);
  return sizes;
}

void require_no_nan(const ad::Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (std::isnan(v)) throw Error(std::string("gsac_forward: NaN in ") + what);
  }
}

void validate_config(const PolicyConfig& cfg) {
  if (cfg.agents < 2) throw ConfigError("policy: at least two agents are needed for message passing");
  if (cfg.edge_types < 2) throw ConfigError("policy: need a null edge type plus at least one message type");
  if (cfg.hidden == 0 || cfg.state_dim == 0 || cfg.action_dim == 0) throw ConfigError("policy: zero width");
  if (!(cfg.temperature > 0.0)) throw ConfigError("policy: temperature must be positive");
  if (!(cfg.sigma_min > 0.0)) throw ConfigError("policy: sigma_min must be positive");
  if (!(cfg.v_max > 0.0)) throw ConfigError("policy: v_max must be positive");
}

}  // namespace

GraphPolicy::GraphPolicy(PolicyConfig cfg, Rng& rng) : cfg_(cfg) {
  validate_config(cfg_);
  const std::size_t H = cfg_.hidden;
  const std::size_t L = cfg_.hidden_layers;
  const std::size_t ds = cfg_.state_dim;
  enc_e1_ = {"enc.e1", stack(2 * ds, H, L, H)};
  enc_v_ = {"enc.v", stack(H + ds, H, L, H)};
  enc_e2_ = {"enc.e2", stack(3 * H, H, L, H)};
  enc_lstm_ = {"enc.lstm", H, H};
  enc_out_ = {"enc.out", stack(H, H, L, cfg_.edge_types)};
  enc_e1_.init(enc_, rng);
  enc_v_.init(enc_, rng);
  enc_e2_.init(enc_, rng);
  enc_lstm_.init(enc_, rng);
  enc_out_.init(enc_, rng);

  for (std::size_t k = 1; k < cfg_.edge_types; ++k) {
    msg_.push_back({"actor.msg" + std::to_string(k), stack(2 * ds, H, L, H)});
    msg_.back().init(actor_, rng);
  }
  mu_ = {"actor.mu", stack(H, H, L - (L > 0 ? 1 : 0), cfg_.action_dim)};
  sigma_ = {"actor.sigma", stack(H, H, L - (L > 0 ? 1 : 0), cfg_.action_dim)};
  mu_.init(actor_, rng);
  sigma_.init(actor_, rng);
}

std::size_t GraphPolicy::batch_of(const ad::Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != cfg_.state_dim || x.dim(0) % cfg_.agents != 0 || x.dim(0) == 0) {
    throw Error("policy: observations must be [B*" + std::to_string(cfg_.agents) + ", " +
                std::to_string(cfg_.state_dim) + "], got " + ad::shape_str(x.shape()));
  }
  return x.dim(0) / cfg_.agents;
}

EncoderState GraphPolicy::initial_state(std::size_t batch) const {
  const std::size_t rows = graph(batch).edge_rows();
  return {ad::Tensor::zeros({rows, cfg_.hidden}), ad::Tensor::zeros({rows, cfg_.hidden})};
}

std::pair<EncoderState, InteractionGraphSample> GraphPolicy::encode_step(const EncoderState& state,
                                                                         const ad::Tensor& x) const {
  const auto g = graph(batch_of(x));
  for (double v : x.data()) {
    if (!(std::abs(v) <= cfg_.obs_bound)) {
      throw Error("encode_step: observation " + std::to_string(v) + " outside the normalized range [-" +
                  std::to_string(cfg_.obs_bound) + ", " + std::to_string(cfg_.obs_bound) + "]");
    }
  }
  if (state.h.dim(0) != g.edge_rows()) throw Error("encode_step: encoder state does not match the batch");
  auto e1 = nn::node_to_edge(enc_, enc_e1_, g, x);
  auto v = nn::edge_to_node(enc_, enc_v_, g, ad::tanh(e1), x);
  auto e2 = nn::node_to_edge(enc_, enc_e2_, g, ad::tanh(v), ad::tanh(e1));
  auto next = nn::lstm_step(enc_, enc_lstm_, ad::tanh(e2), state.h, state.c);
  InteractionGraphSample dist;
  dist.logits = nn::mlp_forward(enc_, enc_out_, next.h);
  dist.probs = ad::softmax(dist.logits, 1);
  dist.temperature = cfg_.temperature;
  return {EncoderState{next.h, next.c}, dist};
}

ad::Tensor sample_edges(const InteractionGraphSample& dist, bool hard, Rng& rng) {
  if (!(dist.temperature > 0.0)) throw Error("sample_edges: temperature must be positive");
  std::vector<double> gumbel(dist.logits.numel());
  for (auto& g : gumbel) {
    const double u = std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12);
    g = -std::log(-std::log(u));
  }
  auto noisy = ad::add(dist.logits, ad::Tensor(dist.logits.shape(), std::move(gumbel)));
  auto soft = ad::softmax(ad::scale(noisy, 1.0 / dist.temperature), 1);
  if (!hard) return soft;
  const std::size_t rows = soft.dim(0);
  const std::size_t k = soft.dim(1);
  std::vector<double> onehot(rows * k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = soft.data().subspan(r * k, k);
    onehot[r * k + static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())] = 1.0;
  }
  return ad::straight_through(soft, ad::Tensor(soft.shape(), std::move(onehot)));
}

ad::Tensor GraphPolicy::aggregate_messages(const ad::Tensor& x, const ad::Tensor& z) const {
  const auto g = graph(batch_of(x));
  if (z.rank() != 2 || z.dim(0) != g.edge_rows() || z.dim(1) != cfg_.edge_types) {
    throw Error("gsac_forward: edge sample must be [" + std::to_string(g.edge_rows()) + ", " +
                std::to_string(cfg_.edge_types) + "], got " + ad::shape_str(z.shape()));
  }
  ad::Tensor total;
  for (std::size_t k = 1; k < cfg_.edge_types; ++k) {
    auto m = ad::scale_rows(nn::node_to_edge(actor_, msg_[k - 1], g, x), ad::narrow(z, 1, k, 1));
    total = total.defined() ? ad::add(total, m) : m;
  }
  return nn::aggregate_incoming(g, total);
}

PolicyOutput GraphPolicy::act(const ad::Tensor& x, const ad::Tensor& z, Rng& rng, bool deterministic) const {
  auto agg = aggregate_messages(x, z);
  PolicyOutput out;
  out.mu = nn::mlp_forward(actor_, mu_, agg);
  out.sigma = ad::add_scalar(ad::softplus(nn::mlp_forward(actor_, sigma_, agg)), cfg_.sigma_min);
  require_no_nan(out.mu, "mu");
  require_no_nan(out.sigma, "sigma");

  std::vector<double> eps(out.mu.numel(), 0.0);
  if (!deterministic) {
    for (auto& e : eps) e = rng.normal();
  }
  auto eps_t = ad::Tensor(out.mu.shape(), eps);
  out.pre_squash = ad::add(out.mu, ad::mul(out.sigma, eps_t));
  out.action = ad::scale(ad::tanh(out.pre_squash), cfg_.v_max);

  // log N(u; mu, sigma) - log|d action / d u|, with
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
  const double log_norm_const = 0.5 * std::log(2.0 * std::numbers::pi);
  auto gauss = ad::add_scalar(ad::add(ad::scale(ad::square(eps_t), -0.5), ad::neg(ad::log(out.sigma))),
                              -log_norm_const);
  auto u = out.pre_squash;
  auto log_jac = ad::add_scalar(ad::scale(ad::add(u, ad::softplus(ad::scale(u, -2.0))), -2.0),
                                2.0 * std::numbers::ln2 + std::log(cfg_.v_max));
  out.log_prob = ad::sum(ad::sub(gauss, log_jac), 1);
  out.log_prob = ad::reshape(out.log_prob, {out.mu.dim(0), 1});
  return out;
}

CriticNet::CriticNet(const PolicyConfig& cfg) : cfg_(cfg) {
  validate_config(cfg_);
  const std::size_t H = cfg_.hidden;
  const std::size_t L = cfg_.hidden_layers;
  const std::size_t w = cfg_.state_dim + cfg_.action_dim;
  for (std::size_t k = 1; k < cfg_.edge_types; ++k) msg_.push_back({"msg" + std::to_string(k), stack(2 * w, H, L, H)});
  head_ = {"head", stack(H, H, L - (L > 0 ? 1 : 0), 1)};
}

void CriticNet::init(nn::ParameterSet& params, Rng& rng) const {
  for (const auto& m : msg_) m.init(params, rng);
  head_.init(params, rng);
}

ad::Tensor CriticNet::per_agent(const nn::ParameterSet& params, const ad::Tensor& x, const ad::Tensor& z,
                                const ad::Tensor& a) const {
  if (x.rank() != 2 || a.rank() != 2 || x.dim(0) != a.dim(0) || x.dim(1) != cfg_.state_dim ||
      a.dim(1) != cfg_.action_dim || x.dim(0) % cfg_.agents != 0) {
    throw Error("critic_q: expected states [B*N, " + std::to_string(cfg_.state_dim) + "] and actions [B*N, " +
                std::to_string(cfg_.action_dim) + "], got " + ad::shape_str(x.shape()) + " and " +
                ad::shape_str(a.shape()));
  }
  const nn::PairIndex g(cfg_.agents, x.dim(0) / cfg_.agents);
  if (z.rank() != 2 || z.dim(0) != g.edge_rows() || z.dim(1) != cfg_.edge_types) {
    throw Error("critic_q: edge weights must be [" + std::to_string(g.edge_rows()) + ", " +
                std::to_string(cfg_.edge_types) + "], got " + ad::shape_str(z.shape()));
  }
  auto xa = ad::concat({x, ad::scale(a, 1.0 / cfg_.v_max)}, 1);
  ad::Tensor total;
  for (std::size_t k = 1; k < cfg_.edge_types; ++k) {
    auto m = ad::scale_rows(nn::node_to_edge(params, msg_[k - 1], g, xa), ad::narrow(z, 1, k, 1));
    total = total.defined() ? ad::add(total, m) : m;
  }
  return nn::mlp_forward(params, head_, nn::aggregate_incoming(g, total));
}

ad::Tensor CriticNet::q(const nn::ParameterSet& params, const ad::Tensor& x, const ad::Tensor& z,
                        const ad::Tensor& a) const {
  auto per = per_agent(params, x, z, a);
  const std::size_t batch = per.dim(0) / cfg_.agents;
  return ad::reshape(ad::mean(ad::reshape(per, {batch, cfg_.agents}), 1), {batch, 1});
}

CriticPair::CriticPair(const PolicyConfig& cfg, double rho, Rng& rng) : net(cfg), polyak_rho(rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("critic: polyak rho must lie in (0, 1]");
  for (int k = 0; k < 2; ++k) {
    net.init(online[k], rng);
    target[k] = online[k].clone();
  }
}

void polyak_update(nn::ParameterSet& target, const nn::ParameterSet& online, double rho) {
  if (target.size() != online.size()) throw Error("polyak_update: parameter counts differ");
  auto it = online.begin();
  for (auto& [name, t] : target) {
    if (it->first != name) throw Error("polyak_update: name mismatch '" + name + "' vs '" + it->first + "'");
    if (it->second.shape() != t.shape()) throw Error("polyak_update: shape mismatch for '" + name + "'");
    auto dst = t.mutable_data();
    auto src = it->second.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = rho * dst[k] + (1.0 - rho) * src[k];
    ++it;
  }
}

void polyak_update(CriticPair& pair) {
  for (int k = 0; k < 2; ++k) polyak_update(pair.target[k], pair.online[k], pair.polyak_rho);
}

}  // namespace ssmail::policy
