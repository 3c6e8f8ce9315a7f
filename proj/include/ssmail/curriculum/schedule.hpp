#pragma once

#include <cstddef>
#include <vector>

#include "ssmail/common/rng.hpp"

namespace ssmail::curriculum {

/// Trajectory Forcing schedule: teacher-forcing interventions happen with
/// per-step probability base^(-epoch/beta).
struct CurriculumSchedule {
  double beta = 1.0;  // epochs per multiplication of the expected segment length
  double base = 1.5;
  std::size_t total_epochs = 1;
  bool enabled = true;

  /// beta given as a fraction of total_epochs. A fraction of 0 disables forcing.
  static CurriculumSchedule from_fraction(double beta_fraction, std::size_t total_epochs, double base = 1.5);
};

/// base^(-epoch/beta) in (0, 1]; 0 when the schedule is disabled.
double intervention_frequency(const CurriculumSchedule& sched, double epoch);

/// 1 / frequency = base^(epoch/beta): mean self-generated steps between interventions.
double expected_segment_length(const CurriculumSchedule& sched, double epoch);

/// One Bernoulli(frequency) decision per rollout step; true means the state
/// fed to the policy at the next step is replaced by the expert's.
/// Throws if the expert trajectory is shorter than the rollout.
std::vector<bool> apply_forcing(std::size_t rollout_len, std::size_t expert_len, double frequency, Rng& rng);

/// Lengths of the step runs closed by each intervention (inclusive of the
/// intervention step). A trailing run without an intervention is dropped.
std::vector<std::size_t> segment_lengths(const std::vector<bool>& decisions);

}  // namespace ssmail::curriculum
