#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ssmail/autodiff/tensor.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::nn {

enum class Activation { identity, tanh, relu };

/// Affine-activation stack with a linear output layer.
///
/// Parameters live in a shared ParameterSet under `<prefix>.w<k>` ([in, out])
/// and `<prefix>.b<k>` ([out]), so one set can hold several networks.
struct MlpSpec {
  std::string prefix;
  std::vector<std::size_t> sizes;  // input, hidden..., output
  Activation hidden = Activation::tanh;

  std::size_t in() const { return sizes.front(); }
  std::size_t out() const { return sizes.back(); }
  std::size_t layers() const { return sizes.size() - 1; }

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  void init(ParameterSet& params, Rng& rng) const;
  std::string weight(std::size_t layer) const { return prefix + ".w" + std::to_string(layer); }
  std::string bias(std::size_t layer) const { return prefix + ".b" + std::to_string(layer); }
};

/// x: [batch, in] -> [batch, out].
ad::Tensor mlp_forward(const ParameterSet& params, const MlpSpec& spec, const ad::Tensor& x);

/// Single LSTM cell. Parameters: `<prefix>.w` [input+hidden, 4*hidden] and
/// `<prefix>.b` [4*hidden], gate blocks ordered input, forget, candidate,
/// output. The forget-gate bias starts at +1.
struct LstmSpec {
  std::string prefix;
  std::size_t input = 0;
  std::size_t hidden = 0;

  void init(ParameterSet& params, Rng& rng) const;
};

struct LstmState {
  ad::Tensor h;
  ad::Tensor c;
};

/// x: [batch, input], h/c: [batch, hidden].
LstmState lstm_step(const ParameterSet& params, const LstmSpec& spec, const ad::Tensor& x, const ad::Tensor& h,
                    const ad::Tensor& c);

}  // namespace ssmail::nn
