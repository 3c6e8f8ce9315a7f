#pragma once

// Frozen generated/expert trajectory pools for discriminator regression
// checks, plus the Spearman rank correlation used to judge monotonicity.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/rng.hpp"
#include "ssmail/discriminator/discriminator.hpp"
#include "ssmail/envs/datasets.hpp"
#include "ssmail/envs/yjunction.hpp"
#include "ssmail/nn/adam.hpp"

namespace ssmail::testing {

struct FrozenPool {
  std::vector<envs::Trajectory> gen;
  std::vector<envs::Trajectory> exp;
};

/// Experts from the Y-Junction; generated episodes drift from the same
/// starts with a constant per-episode velocity. States are normalized with
/// `norm`, actions divided by the action bound.
inline FrozenPool yjunction_pool(std::size_t n, std::uint64_t seed, const envs::Normalizer& norm) {
  envs::YJunction env;
  Rng rng(seed);
  FrozenPool pool;
  const double v_max = env.spec().v_max;
  auto finish = [&](envs::Trajectory tr) {
    envs::Trajectory out = tr;
    norm.normalize(out.states);
    for (auto& a : out.actions) a /= v_max;
    return out;
  };
  for (std::size_t e = 0; e < n; ++e) {
    auto ex = env.sample_expert(rng);
    envs::Trajectory g = ex;
    const double vx = rng.uniform(-0.3, 0.3);
    const double vy = rng.uniform(-0.3, 0.3);
    for (std::size_t t = 0; t < g.horizon; ++t) {
      for (std::size_t i = 0; i < g.agents; ++i) {
        g.a(t, i, 0) = vx;
        g.a(t, i, 1) = vy;
        if (t > 0) {
          g.s(t, i, 0) = g.s(t - 1, i, 0) + vx * g.dt;
          g.s(t, i, 1) = g.s(t - 1, i, 1) + vy * g.dt;
        }
      }
    }
    g.mode.reset();
    pool.exp.push_back(finish(ex));
    pool.gen.push_back(finish(g));
  }
  return pool;
}

inline envs::Normalizer yjunction_normalizer() {
  envs::YJunction env;
  Rng rng(12345);
  std::vector<envs::Trajectory> ex;
  for (int k = 0; k < 200; ++k) ex.push_back(env.sample_expert(rng));
  return envs::Normalizer::fit(ex);
}

/// Trains `d` on the pool: each step draws `per_step` (gen, exp) pairs and
/// one alpha per pair. Returns the loss trace.
inline std::vector<double> train_frozen(disc::Discriminator& d, const FrozenPool& pool, disc::AlphaSampler& sampler,
                                        std::size_t steps, double lr, std::uint64_t seed, std::size_t per_step = 4,
                                        nn::AdamState* shared_adam = nullptr) {
  Rng rng(seed);
  nn::AdamState local(nn::AdamConfig{.learning_rate = lr});
  nn::AdamState& adam = shared_adam ? *shared_adam : local;
  std::vector<double> trace;
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<envs::Trajectory> g;
    std::vector<envs::Trajectory> e;
    std::vector<disc::InterpolatedBatch> mid;
    for (std::size_t b = 0; b < per_step; ++b) {
      const auto& gi = pool.gen[rng.index(pool.gen.size())];
      const auto& ei = pool.exp[rng.index(pool.exp.size())];
      g.push_back(gi);
      e.push_back(ei);
      mid.push_back(disc::interpolate(gi, ei, sampler.sample()));
    }
    ad::Tape tape;
    auto loss = disc::objective_loss(d, disc::make_batch(g), disc::make_batch(e), disc::make_batch(mid), rng);
    tape.backward(loss);
    trace.push_back(loss.item());
    nn::adam_step(adam, d.params());
  }
  return trace;
}

/// Mean score over every row of interpolants of the held-out pairs at `alpha`.
inline double mean_score_at(const disc::Discriminator& d, const FrozenPool& held, double alpha,
                            double* mean_abs_err = nullptr) {
  std::vector<disc::InterpolatedBatch> mids;
  for (std::size_t k = 0; k < held.gen.size(); ++k) mids.push_back(disc::interpolate(held.gen[k], held.exp[k], alpha));
  auto batch = disc::make_batch(mids);
  auto r = disc::reward(d, batch.states, batch.actions);
  const double m = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
  if (mean_abs_err) {
    double err = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) err += std::abs(r[k] - batch.labels[k]);
    *mean_abs_err = err / r.size();
  }
  return m;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rx = ranks(x);
  auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ssmail::testing
