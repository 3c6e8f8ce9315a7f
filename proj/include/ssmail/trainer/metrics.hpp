#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssmail/discriminator/discriminator.hpp"
#include "ssmail/envs/datasets.hpp"
#include "ssmail/envs/trajectory.hpp"
#include "ssmail/trainer/rollout.hpp"

namespace ssmail::trainer {

/// Mean squared state deviation between two aligned trajectories.
double state_mse(const envs::Trajectory& a, const envs::Trajectory& b);

/// Mean over episodes of the minimum over modes of state_mse.
double training_error(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& modes);

/// Mean over episodes of state_mse against each episode's own reference.
double paired_error(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& refs);

struct ModeCoverage {
  std::vector<double> frequency;  // per mode
  double mean_distance = 0.0;     // to the nearest mode
};

/// Distance of an episode to a mode: mean over agents of the Euclidean
/// distance between terminal states. Needs at least two modes.
double endpoint_distance(const envs::Trajectory& a, const envs::Trajectory& b);
ModeCoverage mode_coverage(const std::vector<envs::Trajectory>& generated, const std::vector<envs::Trajectory>& modes);

/// Closed-loop error growth on a dataset: the first `prefix` observed states
/// come from the data, later ones from the controller's own predictions.
/// Every observation gets N(0, sigma^2) noise. Entry h is the mean squared
/// normalized deviation at state index prefix - 1 + horizons[h].
std::vector<double> compounding_error(Controller& ctrl, const envs::Environment& env, const envs::Normalizer& norm,
                                      const std::vector<envs::Trajectory>& data, double noise_sigma,
                                      const std::vector<std::size_t>& horizons, std::size_t prefix,
                                      std::uint64_t seed);

/// Least-squares slope of errors against horizons.
double slope(const std::vector<std::size_t>& horizons, const std::vector<double>& errors);

/// Two input coordinates of D varied over a region, the rest held at a base
/// point. All values are in discriminator input units.
struct LandscapeSlice {
  std::vector<double> state;
  std::vector<double> action;
  std::size_t dim_x = 0;  // indices into state
  std::size_t dim_y = 1;
};

struct Region {
  double x0 = -1.0;
  double y0 = -1.0;
  double x1 = 1.0;
  double y1 = 1.0;
};

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

/// resolution x resolution grid, x varying fastest.
std::vector<GridPoint> landscape_grid(const disc::Discriminator& d, const LandscapeSlice& slice, const Region& region,
                                      std::size_t resolution);
void write_grid_csv(const std::filesystem::path& path, const std::vector<GridPoint>& grid);

}  // namespace ssmail::trainer
