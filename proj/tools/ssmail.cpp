#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ssmail/common/error.hpp"
#include "ssmail/trainer/config.hpp"
#include "ssmail/trainer/metrics.hpp"
#include "ssmail/trainer/rollout.hpp"
#include "ssmail/trainer/trainer.hpp"

using namespace ssmail;
using namespace ssmail::trainer;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRunFailure = 2;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad number in ") + what + ": '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  for (double v : parse_doubles(s, what)) {
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw ConfigError(std::string(what) + " must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void print_summary(const TrainResult& r) {
  std::printf("seed,ok,initial_error,best_error,best_epoch,epochs_run,epochs_to_threshold\n");
  for (const auto& s : r.seeds) {
    if (!s.ok) {
      std::printf("%llu,0,,,,,  # %s\n", static_cast<unsigned long long>(s.seed), s.error.c_str());
      continue;
    }
    std::printf("%llu,1,%.6g,%.6g,%zu,%zu,%s\n", static_cast<unsigned long long>(s.seed), s.initial_error,
                s.best_error, s.best_epoch, s.epochs_run,
                s.epochs_to_threshold ? std::to_string(*s.epochs_to_threshold).c_str() : "");
  }
}

RunConfig config_with_seeds(const std::string& path, int seeds) {
  auto cfg = load_run_config(path);
  if (seeds > 0) {
    cfg.seeds.resize(static_cast<std::size_t>(seeds));
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), 0);
  }
  return cfg;
}

int cmd_train(const std::string& config, int seeds) {
  auto cfg = config_with_seeds(config, seeds);
  cfg.validate();
  auto result = train(cfg);
  print_summary(result);
  return result.all_ok() ? kOk : kRunFailure;
}

int cmd_eval(const std::string& checkpoint, double sigma, const std::string& horizons_text, std::size_t episodes,
             std::size_t prefix, std::uint64_t seed) {
  auto loaded = load_agent(checkpoint);
  auto horizons = parse_sizes(horizons_text, "horizons");
  if (sigma < 0.0) throw ConfigError("noise-sigma must be >= 0");
  auto env = make_environment(loaded.config.env);
  auto data = held_out_dataset(loaded.config.env, episodes, seed);
  GraphController ctrl(loaded.agent.policy, true, seed);
  auto errs = compounding_error(ctrl, *env, loaded.agent.norm, data, sigma, horizons, prefix, seed);
  std::printf("horizon,compounding_error\n");
  for (std::size_t k = 0; k < horizons.size(); ++k) std::printf("%zu,%.17g\n", horizons[k], errs[k]);
  if (horizons.size() >= 2) std::printf("# slope %.6g\n", slope(horizons, errs));
  auto modes = env->mode_references();
  if (modes.size() >= 2) {
    Rng rng(seed);
    RolloutOptions opts;
    opts.record_transitions = false;
    opts.deterministic = loaded.config.method == "bc";
    auto ro = collect_rollouts(loaded.agent.policy, *env, loaded.agent.norm, episodes, opts, rng);
    auto cov = mode_coverage(ro.generated, modes);
    std::printf("# mode frequencies");
    for (double f : cov.frequency) std::printf(" %.4f", f);
    std::printf(", mean distance to nearest mode %.4f\n", cov.mean_distance);
  }
  return kOk;
}

int cmd_landscape(const std::string& checkpoint, const std::string& region_text, std::size_t resolution,
                  const std::string& out_path, std::size_t agent) {
  auto loaded = load_agent(checkpoint);
  auto r = parse_doubles(region_text, "region");
  if (r.size() != 4) throw ConfigError("region must be x0,y0,x1,y1");
  auto env = make_environment(loaded.config.env);
  const auto& spec = env->spec();
  if (agent >= spec.agents) throw ConfigError("agent index out of range");
  if (spec.state_dim < 2) throw ConfigError("landscape needs a state with at least two coordinates");
  auto modes = env->mode_references();
  envs::Trajectory base = modes.empty() ? held_out_dataset(loaded.config.env, 1, 0).front() : modes.front();
  base = loaded.agent.norm.apply(base);
  const std::size_t t = base.horizon / 2;
  LandscapeSlice slice;
  slice.state.assign(base.state_at(t).begin(), base.state_at(t).end());
  slice.action.assign(base.action_at(t).begin(), base.action_at(t).end());
  slice.dim_x = agent * spec.state_dim;
  slice.dim_y = agent * spec.state_dim + 1;
  auto grid = landscape_grid(loaded.agent.disc, slice, Region{r[0], r[1], r[2], r[3]}, resolution);
  write_grid_csv(out_path, grid);
  std::printf("wrote %zu grid points to %s\n", grid.size(), out_path.c_str());
  return kOk;
}

int cmd_ablate(const std::string& config, const std::string& param, const std::string& values_text, int seeds) {
  auto base = config_with_seeds(config, seeds);
  auto values = split(values_text, ',');
  if (values.empty()) throw ConfigError("ablate needs at least one value");
  std::vector<RunConfig> runs;
  for (const auto& v : values) {
    runs.push_back(with_override(base, param, v));
    runs.back().validate();
  }
  bool ok = true;
  std::printf("%s,seeds_ok,mean_best_error,mean_epochs_to_threshold\n", param.c_str());
  for (std::size_t k = 0; k < runs.size(); ++k) {
    auto res = train(runs[k]);
    ok = ok && res.all_ok();
    double err = 0.0;
    double ett = 0.0;
    std::size_t n = 0;
    for (const auto& s : res.seeds) {
      if (!s.ok) continue;
      ++n;
      err += s.best_error;
      ett += static_cast<double>(s.epochs_to_threshold.value_or(runs[k].epochs + 1));
    }
    if (n == 0) {
      std::printf("%s,0,,\n", values[k].c_str());
      continue;
    }
    std::printf("%s,%zu,%.6g,%.6g\n", values[k].c_str(), n, err / static_cast<double>(n),
                ett / static_cast<double>(n));
  }
  return ok ? kOk : kRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised adversarial multi-agent imitation learning"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::string config;
  int seeds = 0;
  auto* train_cmd = app.add_subcommand("train", "Train one run per seed");
  train_cmd->add_option("--config", config, "JSON run configuration")->required();
  train_cmd->add_option("--seeds", seeds, "Use seeds 0..n-1 instead of the configured list");

  std::string checkpoint;
  double sigma = 0.0;
  std::string horizons = "1,5,10,20,30";
  std::size_t episodes = 32;
  std::size_t prefix = 10;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Compounding error of a checkpoint on held-out data");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--noise-sigma", sigma, "Observation noise standard deviation");
  eval_cmd->add_option("--horizons", horizons, "Comma-separated horizons");
  eval_cmd->add_option("--episodes", episodes);
  eval_cmd->add_option("--prefix", prefix, "Ground-truth steps before closed loop");
  eval_cmd->add_option("--seed", eval_seed);

  std::string region;
  std::size_t resolution = 50;
  std::string out_path = "landscape.csv";
  std::size_t agent = 0;
  auto* land_cmd = app.add_subcommand("landscape", "Discriminator scores over a 2D state slice");
  land_cmd->add_option("--checkpoint", checkpoint)->required();
  land_cmd->add_option("--region", region, "x0,y0,x1,y1 in normalized units")->required();
  land_cmd->add_option("--resolution", resolution);
  land_cmd->add_option("--out", out_path);
  land_cmd->add_option("--agent", agent, "Agent whose position is varied");

  std::string param;
  std::string values;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train once per parameter value");
  ablate_cmd->add_option("--config", config)->required();
  ablate_cmd->add_option("--param", param, "alpha_range or beta")->required();
  ablate_cmd->add_option("--values", values, "Comma-separated values")->required();
  ablate_cmd->add_option("--seeds", seeds);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train_cmd) return cmd_train(config, seeds);
    if (*eval_cmd) return cmd_eval(checkpoint, sigma, horizons, episodes, prefix, eval_seed);
    if (*land_cmd) return cmd_landscape(checkpoint, region, resolution, out_path, agent);
    if (*ablate_cmd) return cmd_ablate(config, param, values, seeds);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kRunFailure;
  }
  return kOk;
}
