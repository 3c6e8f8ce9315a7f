#pragma once

// Central finite-difference oracle for reverse-mode gradients. Test-only: it
// only reads forward values, never the analytic backward path it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/rng.hpp"

namespace ssmail::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  bool ok = true;
  std::string worst;
};

inline GradCheckResult grad_check(std::vector<ad::Tensor> inputs, const std::function<ad::Tensor()>& loss_fn,
                                  double step = 1e-5, double rel_tol = 1e-4, double abs_tol = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    ad::Tape tape;
    auto loss = loss_fn();
    tape.backward(loss);
    for (auto& t : inputs) {
      auto g = t.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
    }
  }

  GradCheckResult res;
  ad::NoGradGuard guard;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + step;
      const double fp = loss_fn().item();
      data[i] = orig - step;
      const double fm = loss_fn().item();
      data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-300});
      ++res.checked;
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      if (abs_err > abs_tol) {
        if (rel_err > res.max_rel_err) {
          res.max_rel_err = rel_err;
          res.worst = "input " + std::to_string(k) + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                      " numeric=" + std::to_string(numeric);
        }
        if (rel_err >= rel_tol) res.ok = false;
      }
    }
  }
  return res;
}

inline ad::Tensor random_tensor(Rng& rng, ad::Shape shape, double lo = -2.0, double hi = 2.0,
                                bool requires_grad = true) {
  std::vector<double> v(ad::numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace ssmail::testing
