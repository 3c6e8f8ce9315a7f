#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssmail/discriminator/discriminator.hpp"

namespace ssmail::trainer {

struct SACConfig {
  double gamma = 0.99;
  double entropy = 0.01;  // lambda_H
  double polyak = 0.995;
  std::size_t batch = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::size_t updates_per_epoch = 10;
  std::size_t buffer_capacity = 20000;

  void validate() const;
};

struct DiscTrainConfig {
  disc::Objective objective = disc::Objective::ss_mse;
  disc::AlphaMode alpha_mode = disc::AlphaMode::symmetric;
  std::vector<std::size_t> hidden{64, 64};
  double lr = 3e-4;
  std::size_t steps_per_epoch = 50;
  std::size_t pairs_per_step = 4;  // generated/expert pairs, one interpolation each
  double gp_coeff = 10.0;
  // discriminator steps per epoch >= ratio * policy updates per epoch
  double two_timescale_ratio = 5.0;
};

struct CurriculumConfig {
  bool enabled = true;
  double beta_fraction = 0.15;
  double base = 1.5;
};

struct EnvConfig {
  std::string name = "yjunction";  // yjunction | orbit | csv
  std::string path;                // csv only
  std::size_t episodes = 64;       // orbit only
  std::uint64_t data_seed = 0;
  double v_max = 2.0;
};

struct RunConfig {
  std::string method = "ail";  // ail | bc
  EnvConfig env;
  DiscTrainConfig disc;
  SACConfig sac;
  CurriculumConfig curriculum;
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  double temperature = 0.5;
  std::vector<std::uint64_t> seeds{0};
  std::size_t epochs = 300;
  std::size_t patience = 20;
  std::size_t episodes_per_epoch = 8;
  std::size_t val_episodes = 16;
  double threshold_fraction = 0.1;
  double bc_lr = 1e-3;
  std::vector<std::size_t> horizons;  // compounding error columns; empty disables
  std::size_t eval_prefix = 10;
  double noise_sigma = 0.0;
  std::string output_dir = "runs/default";
  bool write_checkpoints = true;

  /// Throws ConfigError on any inconsistency, including an unwritable output directory.
  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace ssmail::trainer
