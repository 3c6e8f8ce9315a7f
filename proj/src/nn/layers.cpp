#include "ssmail/nn/layers.hpp"

#include <cmath>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::nn {

namespace {

ad::Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng) {
  std::vector<double> v(ad::numel_of(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor(std::move(shape), std::move(v), true);
}

void require_width(const ad::Tensor& t, std::size_t width, const std::string& what) {
  if (t.rank() != 2 || t.dim(1) != width) {
    throw Error(what + ": expected [batch, " + std::to_string(width) + "], got " + ad::shape_str(t.shape()));
  }
}

}  // namespace

void MlpSpec::init(ParameterSet& params, Rng& rng) const {
  if (sizes.size() < 2) throw Error("MlpSpec '" + prefix + "': needs at least input and output sizes");
  for (std::size_t l = 0; l < layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    params.add(weight(l), uniform_tensor({sizes[l], sizes[l + 1]}, bound, rng));
    params.add(bias(l), uniform_tensor({sizes[l + 1]}, bound, rng));
  }
}

ad::Tensor mlp_forward(const ParameterSet& params, const MlpSpec& spec, const ad::Tensor& x) {
  require_width(x, spec.in(), "mlp '" + spec.prefix + "'");
  ad::Tensor h = x;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    h = ad::add(ad::matmul(h, params.get(spec.weight(l))), params.get(spec.bias(l)));
    if (l + 1 < spec.layers()) {
      switch (spec.hidden) {
        case Activation::tanh: h = ad::tanh(h); break;
        case Activation::relu: h = ad::relu(h); break;
        case Activation::identity: break;
      }
    }
  }
  return h;
}

void LstmSpec::init(ParameterSet& params, Rng& rng) const {
  if (input == 0 || hidden == 0) throw Error("LstmSpec '" + prefix + "': zero width");
  const double bound = 1.0 / std::sqrt(static_cast<double>(input + hidden));
  params.add(prefix + ".w", uniform_tensor({input + hidden, 4 * hidden}, bound, rng));
  auto b = uniform_tensor({4 * hidden}, bound, rng);
  auto bd = b.mutable_data();
  for (std::size_t k = hidden; k < 2 * hidden; ++k) bd[k] = 1.0;
  params.add(prefix + ".b", b);
}

LstmState lstm_step(const ParameterSet& params, const LstmSpec& spec, const ad::Tensor& x, const ad::Tensor& h,
                    const ad::Tensor& c) {
  require_width(x, spec.input, "lstm '" + spec.prefix + "' input");
  require_width(h, spec.hidden, "lstm '" + spec.prefix + "' hidden");
  require_width(c, spec.hidden, "lstm '" + spec.prefix + "' cell");
  if (x.dim(0) != h.dim(0) || h.dim(0) != c.dim(0)) {
    throw Error("lstm '" + spec.prefix + "': batch sizes differ");
  }
  const std::size_t hd = spec.hidden;
  auto gates = ad::add(ad::matmul(ad::concat({x, h}, 1), params.get(spec.prefix + ".w")),
                       params.get(spec.prefix + ".b"));
  auto i = ad::sigmoid(ad::narrow(gates, 1, 0, hd));
  auto f = ad::sigmoid(ad::narrow(gates, 1, hd, hd));
  auto g = ad::tanh(ad::narrow(gates, 1, 2 * hd, hd));
  auto o = ad::sigmoid(ad::narrow(gates, 1, 3 * hd, hd));
  auto c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
  auto h_next = ad::mul(o, ad::tanh(c_next));
  return {h_next, c_next};
}

}  // namespace ssmail::nn
