#include "ssmail/discriminator/discriminator.hpp"

#include <cmath>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::disc {

namespace {

// Keeps sqrt differentiable at a zero input gradient.
constexpr double kNormEps = 1e-12;

void require_nonempty(const SABatch& b, const char* what) {
  if (b.size() == 0) throw Error(std::string(what) + ": empty batch");
}

ad::Tensor joint_input(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a) {
  if (s.rank() != 2 || a.rank() != 2 || s.dim(0) != a.dim(0) || s.dim(1) != d.state_width() ||
      a.dim(1) != d.action_width()) {
    throw Error("discriminator: expected states [B," + std::to_string(d.state_width()) + "] and actions [B," +
                std::to_string(d.action_width()) + "], got " + ad::shape_str(s.shape()) + " and " +
                ad::shape_str(a.shape()));
  }
  return ad::concat({s, a}, 1);
}

void require_finite(const ad::Tensor& t) {
  for (double v : t.data()) {
    if (std::isnan(v)) throw Error("discriminator: NaN score");
  }
}

ad::Tensor column(const std::vector<double>& v) { return ad::Tensor({v.size(), 1}, v); }

}  // namespace

Objective parse_objective(const std::string& name) {
  if (name == "ss_mse") return Objective::ss_mse;
  if (name == "gail_bce") return Objective::gail_bce;
  if (name == "wasserstein") return Objective::wasserstein;
  throw ConfigError("unknown objective '" + name + "' (expected ss_mse, gail_bce or wasserstein)");
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::ss_mse: return "ss_mse";
    case Objective::gail_bce: return "gail_bce";
    case Objective::wasserstein: return "wasserstein";
  }
  return "?";
}

AlphaMode parse_alpha_mode(const std::string& name) {
  if (name == "positive_unit") return AlphaMode::positive_unit;
  if (name == "symmetric") return AlphaMode::symmetric;
  if (name == "extended") return AlphaMode::extended;
  throw ConfigError("unknown alpha mode '" + name + "' (expected positive_unit, symmetric or extended)");
}

std::string to_string(AlphaMode m) {
  switch (m) {
    case AlphaMode::positive_unit: return "positive_unit";
    case AlphaMode::symmetric: return "symmetric";
    case AlphaMode::extended: return "extended";
  }
  return "?";
}

AlphaSampler::AlphaSampler(AlphaMode mode, std::uint64_t seed) : mode_(mode), rng_(seed) {}

double AlphaSampler::lo() const { return mode_ == AlphaMode::positive_unit ? 0.0 : -1.0; }

double AlphaSampler::hi() const { return mode_ == AlphaMode::extended ? 1.5 : 1.0; }

double AlphaSampler::sample() { return rng_.uniform(lo(), hi()); }

double ss_label(double alpha) { return alpha > 1.0 ? 0.0 : alpha; }

InterpolatedBatch interpolate(const envs::Trajectory& gen, const envs::Trajectory& expert, double alpha) {
  if (gen.agents != expert.agents || gen.state_dim != expert.state_dim || gen.action_dim != expert.action_dim) {
    throw Error("interpolate: generated and expert trajectories differ in agents or dims");
  }
  if (expert.horizon < gen.horizon) {
    throw Error("interpolate: expert has " + std::to_string(expert.horizon) + " steps, generated has " +
                std::to_string(gen.horizon));
  }
  InterpolatedBatch out;
  out.alpha = alpha;
  out.label = ss_label(alpha);
  out.traj = gen;
  out.traj.mode.reset();
  const double w = 1.0 - alpha;
  for (std::size_t k = 0; k < gen.states.size(); ++k) out.traj.states[k] = w * gen.states[k] + alpha * expert.states[k];
  for (std::size_t k = 0; k < gen.actions.size(); ++k) {
    out.traj.actions[k] = w * gen.actions[k] + alpha * expert.actions[k];
  }
  return out;
}

SABatch make_batch(const std::vector<envs::Trajectory>& trajs, const std::vector<double>& labels) {
  if (trajs.empty()) throw Error("make_batch: no trajectories");
  if (!labels.empty() && labels.size() != trajs.size()) throw Error("make_batch: one label per trajectory expected");
  const auto& f = trajs.front();
  std::size_t rows = 0;
  for (const auto& tr : trajs) {
    if (tr.agents != f.agents || tr.state_dim != f.state_dim || tr.action_dim != f.action_dim) {
      throw Error("make_batch: trajectories differ in agents or dims");
    }
    rows += tr.horizon;
  }
  std::vector<double> s;
  std::vector<double> a;
  s.reserve(rows * f.state_stride());
  a.reserve(rows * f.action_stride());
  SABatch b;
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    const auto& tr = trajs[e];
    s.insert(s.end(), tr.states.begin(), tr.states.end());
    a.insert(a.end(), tr.actions.begin(), tr.actions.end());
    if (!labels.empty()) b.labels.insert(b.labels.end(), tr.horizon, labels[e]);
  }
  b.states = ad::Tensor({rows, f.state_stride()}, std::move(s));
  b.actions = ad::Tensor({rows, f.action_stride()}, std::move(a));
  return b;
}

SABatch make_batch(const std::vector<InterpolatedBatch>& interps) {
  std::vector<envs::Trajectory> trajs;
  std::vector<double> labels;
  for (const auto& ib : interps) {
    trajs.push_back(ib.traj);
    labels.push_back(ib.label);
  }
  return make_batch(trajs, labels);
}

Discriminator::Discriminator(DiscConfig cfg, std::size_t state_width, std::size_t action_width, Rng& rng)
    : cfg_(std::move(cfg)), state_width_(state_width), action_width_(action_width) {
  std::vector<std::size_t> sizes{state_width + action_width};
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(1);
  spec_ = nn::MlpSpec{"disc", sizes, nn::Activation::relu};
  spec_.init(params_, rng);
}

ad::Tensor d_logits(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a) {
  auto out = nn::mlp_forward(d.params(), d.spec(), joint_input(d, s, a));
  require_finite(out);
  return out;
}

ad::Tensor d_forward(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a) {
  auto z = d_logits(d, s, a);
  return d.config().objective == Objective::gail_bce ? ad::sigmoid(z) : z;
}

ad::Tensor ss_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, const SABatch& interp) {
  require_nonempty(gen, "ss_loss");
  require_nonempty(exp, "ss_loss");
  require_nonempty(interp, "ss_loss");
  if (interp.labels.size() != interp.size()) throw Error("ss_loss: interpolated batch needs one label per row");
  auto d_gen = d_logits(d, gen.states, gen.actions);
  auto d_exp = d_logits(d, exp.states, exp.actions);
  auto d_int = d_logits(d, interp.states, interp.actions);
  return ad::mean(ad::square(d_gen)) + ad::mean(ad::square(1.0 - d_exp)) +
         ad::mean(ad::square(column(interp.labels) - d_int));
}

ad::Tensor gail_bce_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp) {
  require_nonempty(gen, "gail_bce_loss");
  require_nonempty(exp, "gail_bce_loss");
  // log sigmoid(z) = -softplus(-z); log(1 - sigmoid(z)) = -softplus(z)
  auto z_gen = d_logits(d, gen.states, gen.actions);
  auto z_exp = d_logits(d, exp.states, exp.actions);
  return ad::mean(ad::softplus(-z_gen)) + ad::mean(ad::softplus(z_exp));
}

double gail_objective(const std::vector<double>& d_gen, const std::vector<double>& d_exp) {
  if (d_gen.empty() || d_exp.empty()) throw Error("gail_objective: empty batch");
  auto check = [](double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("gail_objective: D = " + std::to_string(p) + " outside (0, 1)");
  };
  double g = 0.0;
  double e = 0.0;
  for (double p : d_gen) {
    check(p);
    g += std::log(p);
  }
  for (double p : d_exp) {
    check(p);
    e += std::log1p(-p);
  }
  return g / d_gen.size() + e / d_exp.size();
}

ad::Tensor input_gradient(const Discriminator& d, const ad::Tensor& x) {
  const auto& spec = d.spec();
  const auto& p = d.params();
  std::vector<ad::Tensor> pre;
  ad::Tensor h = x;
  for (std::size_t l = 0; l + 1 < spec.layers(); ++l) {
    auto z = ad::add(ad::matmul(h, p.get(spec.weight(l))), p.get(spec.bias(l)));
    pre.push_back(z);
    h = spec.hidden == nn::Activation::tanh ? ad::tanh(z) : spec.hidden == nn::Activation::relu ? ad::relu(z) : z;
  }
  ad::Tensor g = ad::Tensor::full({x.dim(0), 1}, 1.0);
  for (std::size_t l = spec.layers(); l-- > 0;) {
    g = ad::matmul(g, ad::transpose(p.get(spec.weight(l))));
    if (l == 0) break;
    const auto& z = pre[l - 1];
    switch (spec.hidden) {
      case nn::Activation::tanh: g = ad::mul(g, 1.0 - ad::square(ad::tanh(z))); break;
      case nn::Activation::relu: {
        std::vector<double> mask(z.numel());
        for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = z.data()[k] > 0.0 ? 1.0 : 0.0;
        g = ad::mul(g, ad::Tensor(z.shape(), std::move(mask)));
        break;
      }
      case nn::Activation::identity: break;
    }
  }
  return g;
}

ad::Tensor wasserstein_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, double gp_coeff,
                            Rng& rng) {
  require_nonempty(gen, "wasserstein_loss");
  require_nonempty(exp, "wasserstein_loss");
  auto critic = ad::mean(d_logits(d, gen.states, gen.actions)) - ad::mean(d_logits(d, exp.states, exp.actions));
  if (gp_coeff == 0.0) return critic;

  const std::size_t rows = gen.size();
  const std::size_t w = d.state_width() + d.action_width();
  auto xg = ad::concat({gen.states, gen.actions}, 1).detach();
  auto xe = ad::concat({exp.states, exp.actions}, 1).detach();
  std::vector<double> mixed(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    const double eps = rng.uniform();
    const std::size_t re = r % exp.size();
    for (std::size_t k = 0; k < w; ++k) {
      mixed[r * w + k] = eps * xg.data()[r * w + k] + (1.0 - eps) * xe.data()[re * w + k];
    }
  }
  auto g = input_gradient(d, ad::Tensor({rows, w}, std::move(mixed)));
  auto norm = ad::sqrt(ad::add_scalar(ad::sum(ad::square(g), 1), kNormEps));
  return critic + gp_coeff * ad::mean(ad::square(norm - 1.0));
}

std::vector<double> reward(const Discriminator& d, const ad::Tensor& s, const ad::Tensor& a) {
  ad::NoGradGuard guard;
  auto z = d_logits(d, s, a);
  std::vector<double> r(z.data().begin(), z.data().end());
  if (d.config().objective == Objective::gail_bce) {
    // -log sigmoid(z) = softplus(-z)
    for (auto& v : r) v = v > 0 ? std::log1p(std::exp(-v)) : -v + std::log1p(std::exp(v));
  }
  return r;
}

ad::Tensor objective_loss(const Discriminator& d, const SABatch& gen, const SABatch& exp, const SABatch& interp,
                          Rng& rng) {
  switch (d.config().objective) {
    case Objective::ss_mse: return ss_loss(d, gen, exp, interp);
    case Objective::gail_bce: return gail_bce_loss(d, gen, exp);
    case Objective::wasserstein: return wasserstein_loss(d, gen, exp, d.config().gp_coeff, rng);
  }
  throw Error("objective_loss: unknown objective");
}

}  // namespace ssmail::disc
