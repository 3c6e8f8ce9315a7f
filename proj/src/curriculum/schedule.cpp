#include "ssmail/curriculum/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssmail/common/error.hpp"

namespace ssmail::curriculum {

namespace {

void validate(const CurriculumSchedule& sched, double epoch) {
  if (!(epoch >= 0.0)) throw Error("curriculum: epoch must be non-negative, got " + std::to_string(epoch));
  if (!(sched.base > 1.0)) throw Error("curriculum: base must exceed 1, got " + std::to_string(sched.base));
  if (sched.enabled && !(sched.beta > 0.0)) throw Error("curriculum: beta must be positive");
}

}  // namespace

CurriculumSchedule CurriculumSchedule::from_fraction(double beta_fraction, std::size_t total_epochs, double base) {
  if (beta_fraction < 0.0) throw Error("curriculum: beta fraction must be non-negative");
  if (total_epochs == 0) throw Error("curriculum: total_epochs must be positive");
  CurriculumSchedule s;
  s.base = base;
  s.total_epochs = total_epochs;
  s.enabled = beta_fraction > 0.0;
  s.beta = s.enabled ? beta_fraction * static_cast<double>(total_epochs) : 1.0;
  return s;
}

double intervention_frequency(const CurriculumSchedule& sched, double epoch) {
  validate(sched, epoch);
  if (!sched.enabled) return 0.0;
  const double f = std::pow(sched.base, -epoch / sched.beta);
  return std::clamp(f, std::numeric_limits<double>::min(), 1.0);
}

double expected_segment_length(const CurriculumSchedule& sched, double epoch) {
  validate(sched, epoch);
  if (!sched.enabled) return std::numeric_limits<double>::infinity();
  return std::pow(sched.base, epoch / sched.beta);
}

std::vector<bool> apply_forcing(std::size_t rollout_len, std::size_t expert_len, double frequency, Rng& rng) {
  if (expert_len < rollout_len) {
    throw Error("apply_forcing: expert trajectory has " + std::to_string(expert_len) + " steps, rollout needs " +
                std::to_string(rollout_len));
  }
  if (!(frequency >= 0.0 && frequency <= 1.0)) throw Error("apply_forcing: frequency outside [0, 1]");
  std::vector<bool> out(rollout_len);
  for (std::size_t t = 0; t < rollout_len; ++t) out[t] = rng.bernoulli(frequency);
  return out;
}

std::vector<std::size_t> segment_lengths(const std::vector<bool>& decisions) {
  std::vector<std::size_t> out;
  std::size_t run = 0;
  for (bool forced : decisions) {
    ++run;
    if (forced) {
      out.push_back(run);
      run = 0;
    }
  }
  return out;
}

}  // namespace ssmail::curriculum
