#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssmail/discriminator/discriminator.hpp"
#include "ssmail/envs/datasets.hpp"
#include "ssmail/envs/environment.hpp"
#include "ssmail/graph_policy/graph_policy.hpp"
#include "ssmail/trainer/config.hpp"

namespace ssmail::trainer {

/// Training environment; `held_out` selects a disjoint data split where
/// the environment is dataset-backed.
std::unique_ptr<envs::Environment> make_environment(const EnvConfig& cfg, bool held_out = false);
/// n experts from the held-out split.
std::vector<envs::Trajectory> held_out_dataset(const EnvConfig& cfg, std::size_t n, std::uint64_t seed);
/// Fitted on 200 sampled experts with a fixed seed.
envs::Normalizer fit_normalizer(const envs::Environment& env);

policy::PolicyConfig policy_config(const RunConfig& cfg, const envs::EnvSpec& spec);

struct Agent {
  policy::GraphPolicy policy;
  policy::CriticPair critics;
  disc::Discriminator disc;
  envs::Normalizer norm;
};

Agent make_agent(const RunConfig& cfg, const envs::EnvSpec& spec, const envs::Normalizer& norm, Rng& rng);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double val_error = 0.0;
};

void save_agent(const std::filesystem::path& path, const Agent& agent, const RunConfig& cfg,
                const envs::EnvSpec& spec, const CheckpointInfo& info);

struct LoadedAgent {
  Agent agent;
  RunConfig config;
  envs::EnvSpec spec;
  CheckpointInfo info;
};

LoadedAgent load_agent(const std::filesystem::path& path);

struct MetricsRow {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  double training_error = 0.0;
  double discriminator_loss = 0.0;
  double policy_objective = 0.0;
  double mode_coverage = 0.0;  // smallest per-mode frequency; nan without modes
  double mode_distance = 0.0;
  std::vector<double> compounding;  // one per configured horizon
};

std::string metrics_header(const std::vector<std::size_t>& horizons);
std::string metrics_line(const MetricsRow& row);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double initial_error = 0.0;
  double best_error = 0.0;
  double final_error = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> epochs_to_threshold;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;
};

struct TrainResult {
  std::vector<SeedResult> seeds;
  bool all_ok() const;
};

/// One seed of the outer loop. Writes <output_dir>/seed_<s>/metrics.csv and
/// best.ckpt. Errors propagate.
SeedResult train_seed(const RunConfig& cfg, std::uint64_t seed);

/// Validates cfg, writes <output_dir>/config.json, then runs every seed;
/// a failing seed is recorded and the others continue.
TrainResult train(const RunConfig& cfg);

/// Copy of cfg with one ablation parameter set from its textual value.
/// alpha_range accepts a mode name or lo:hi (0:1, -1:1, -1:1.5); beta takes
/// a fraction of the epoch budget, 0 meaning no forcing.
RunConfig with_override(const RunConfig& cfg, const std::string& param, const std::string& value);

}  // namespace ssmail::trainer
