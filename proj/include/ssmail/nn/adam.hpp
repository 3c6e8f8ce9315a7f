#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssmail/nn/parameter_set.hpp"

namespace ssmail::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter moments keyed by name; created lazily on the first step.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

/// One bias-corrected Adam update, then zeroes every gradient.
/// Throws if any parameter has no gradient buffer.
void adam_step(AdamState& state, ParameterSet& params);

}  // namespace ssmail::nn
