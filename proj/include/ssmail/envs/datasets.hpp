#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "ssmail/envs/environment.hpp"
#include "ssmail/envs/trajectory.hpp"

namespace ssmail::envs {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// One agent per polyline, traversed at constant speed over `horizon` steps;
/// s_0 is the first waypoint and the state after the last action is the last.
std::vector<Trajectory> letters_expert(const std::vector<std::vector<Point2>>& polylines, std::size_t horizon = 50,
                                       double dt = 0.1);

/// Two-agent polylines tracing the letters "M" and "L".
std::vector<std::vector<Point2>> ml_letters();

/// Per-dimension min/max affine map onto [-1, 1], fitted on states.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> lo, std::vector<double> hi);

  static Normalizer fit(const std::vector<Trajectory>& trajs);

  std::size_t dims() const { return lo_.size(); }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  double scale(std::size_t k) const { return 0.5 * (hi_[k] - lo_[k]); }

  double normalize(double x, std::size_t k) const { return (x - lo_[k]) / scale(k) - 1.0; }
  double denormalize(double y, std::size_t k) const { return (y + 1.0) * scale(k) + lo_[k]; }

  /// In-place on interleaved [.., dims] data.
  void normalize(std::span<double> data) const;
  void denormalize(std::span<double> data) const;
  /// States normalized; actions divided by the matching state scale so the
  /// integrator relation is preserved in normalized units.
  Trajectory apply(const Trajectory& tr) const;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Header: episode,t,agent,s0..,a0..,mode. Floats at 17 significant digits.
void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);
/// Raw values, no normalization. Errors carry the offending line number.
std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path, double dt = 0.1);

struct LoadedDataset {
  std::vector<Trajectory> raw;
  std::vector<Trajectory> normalized;
  Normalizer normalizer;
};

LoadedDataset load_trajectories(const std::filesystem::path& path, double dt = 0.1);

/// Adds i.i.d. N(0, sigma^2) to every state component; actions untouched.
Trajectory inject_noise(const Trajectory& tr, double sigma, std::uint64_t seed);

struct OrbitDatasetConfig {
  std::size_t agents = 3;
  std::size_t horizon = 50;
  double dt = 0.1;
  double radius_min = 0.5;
  double radius_max = 1.5;
  double omega_min = 0.5;
  double omega_max = 1.2;
};

/// Smooth synthetic multi-agent motion standing in for recorded data: agents
/// orbit a drifting shared center with per-agent radius and phase.
std::vector<Trajectory> orbit_dataset(std::size_t episodes, std::uint64_t seed, const OrbitDatasetConfig& cfg = {});

/// Integrator world whose experts are drawn from a fixed trajectory set.
class DatasetEnv final : public Environment {
 public:
  DatasetEnv(std::vector<Trajectory> experts, double v_max);

  const EnvSpec& spec() const override { return spec_; }
  Trajectory sample_expert(Rng& rng) const override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<DatasetEnv>(*this); }
  const std::vector<Trajectory>& experts() const { return experts_; }

 private:
  std::vector<Trajectory> experts_;
  EnvSpec spec_;
};

}  // namespace ssmail::envs
