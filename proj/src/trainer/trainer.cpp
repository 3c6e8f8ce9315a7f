#include "ssmail/trainer/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"
#include "ssmail/curriculum/schedule.hpp"
#include "ssmail/envs/yjunction.hpp"
#include "ssmail/nn/checkpoint.hpp"
#include "ssmail/trainer/metrics.hpp"
#include "ssmail/trainer/replay_buffer.hpp"
#include "ssmail/trainer/rollout.hpp"
#include "ssmail/trainer/updates.hpp"

namespace ssmail::trainer {

using nlohmann::json;

namespace {

constexpr std::uint64_t kHeldOutSalt = 7919;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::unique_ptr<envs::Environment> make_environment(const EnvConfig& cfg, bool held_out) {
  if (cfg.name == "yjunction") {
    envs::YJunctionConfig y;
    y.v_max = cfg.v_max;
    return std::make_unique<envs::YJunction>(y);
  }
  if (cfg.name == "orbit") {
    return std::make_unique<envs::DatasetEnv>(
        envs::orbit_dataset(cfg.episodes, held_out ? cfg.data_seed + kHeldOutSalt : cfg.data_seed), cfg.v_max);
  }
  if (cfg.name == "csv") {
    // a single file has no separate split
    return std::make_unique<envs::DatasetEnv>(envs::read_trajectories_csv(cfg.path), cfg.v_max);
  }
  throw ConfigError("unknown environment '" + cfg.name + "'");
}

std::vector<envs::Trajectory> held_out_dataset(const EnvConfig& cfg, std::size_t n, std::uint64_t seed) {
  auto env = make_environment(cfg, true);
  Rng rng(seed ^ kHeldOutSalt);
  std::vector<envs::Trajectory> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(env->sample_expert(rng));
  return out;
}

envs::Normalizer fit_normalizer(const envs::Environment& env) {
  Rng rng(12345);
  std::vector<envs::Trajectory> sample;
  for (int k = 0; k < 200; ++k) sample.push_back(env.sample_expert(rng));
  return envs::Normalizer::fit(sample);
}

policy::PolicyConfig policy_config(const RunConfig& cfg, const envs::EnvSpec& spec) {
  policy::PolicyConfig p;
  p.agents = spec.agents;
  p.state_dim = spec.state_dim;
  p.action_dim = spec.action_dim;
  p.hidden = cfg.hidden;
  p.hidden_layers = cfg.hidden_layers;
  p.temperature = cfg.temperature;
  p.v_max = spec.v_max;
  return p;
}

Agent make_agent(const RunConfig& cfg, const envs::EnvSpec& spec, const envs::Normalizer& norm, Rng& rng) {
  const auto pc = policy_config(cfg, spec);
  Agent a;
  a.policy = policy::GraphPolicy(pc, rng);
  a.critics = policy::CriticPair(pc, cfg.sac.polyak, rng);
  disc::DiscConfig dc;
  dc.objective = cfg.disc.objective;
  dc.hidden = cfg.disc.hidden;
  dc.gp_coeff = cfg.disc.gp_coeff;
  a.disc = disc::Discriminator(dc, spec.agents * spec.state_dim, spec.agents * spec.action_dim, rng);
  a.norm = norm;
  return a;
}

void save_agent(const std::filesystem::path& path, const Agent& agent, const RunConfig& cfg,
                const envs::EnvSpec& spec, const CheckpointInfo& info) {
  nn::Bundle b;
  b["encoder"] = agent.policy.encoder_params();
  b["actor"] = agent.policy.actor_params();
  b["critic0"] = agent.critics.online[0];
  b["critic1"] = agent.critics.online[1];
  b["target0"] = agent.critics.target[0];
  b["target1"] = agent.critics.target[1];
  b["disc"] = agent.disc.params();
  json meta;
  meta["config"] = json::parse(run_config_to_json(cfg));
  meta["normalizer"] = {{"lo", agent.norm.lo()}, {"hi", agent.norm.hi()}};
  meta["spec"] = {{"agents", spec.agents},   {"state_dim", spec.state_dim}, {"action_dim", spec.action_dim},
                  {"horizon", spec.horizon}, {"dt", spec.dt},               {"v_max", spec.v_max}};
  meta["seed"] = info.seed;
  meta["epoch"] = info.epoch;
  meta["val_error"] = info.val_error;
  nn::save_checkpoint(path, b, meta.dump());
}

LoadedAgent load_agent(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  LoadedAgent out;
  json meta;
  try {
    meta = json::parse(ck.meta_json);
    out.config = run_config_from_json(meta.at("config").dump());
    const auto& s = meta.at("spec");
    out.spec.agents = s.at("agents").get<std::size_t>();
    out.spec.state_dim = s.at("state_dim").get<std::size_t>();
    out.spec.action_dim = s.at("action_dim").get<std::size_t>();
    out.spec.horizon = s.at("horizon").get<std::size_t>();
    out.spec.dt = s.at("dt").get<double>();
    out.spec.v_max = s.at("v_max").get<double>();
    out.info.seed = meta.at("seed").get<std::uint64_t>();
    out.info.epoch = meta.at("epoch").get<std::size_t>();
    out.info.val_error = meta.at("val_error").get<double>();
  } catch (const json::exception& e) {
    throw Error("load_agent: malformed checkpoint metadata in '" + path.string() + "': " + e.what());
  }
  envs::Normalizer norm(meta["normalizer"]["lo"].get<std::vector<double>>(),
                        meta["normalizer"]["hi"].get<std::vector<double>>());
  Rng rng(0);
  out.agent = make_agent(out.config, out.spec, norm, rng);
  auto take = [&](const char* name, nn::ParameterSet& dst) {
    auto it = ck.sets.find(name);
    if (it == ck.sets.end()) throw Error(std::string("load_agent: checkpoint lacks set '") + name + "'");
    dst.copy_values_from(it->second);
  };
  take("encoder", out.agent.policy.encoder_params());
  take("actor", out.agent.policy.actor_params());
  take("critic0", out.agent.critics.online[0]);
  take("critic1", out.agent.critics.online[1]);
  take("target0", out.agent.critics.target[0]);
  take("target1", out.agent.critics.target[1]);
  take("disc", out.agent.disc.params());
  return out;
}

std::string metrics_header(const std::vector<std::size_t>& horizons) {
  std::string h = "epoch,seed,training_error,discriminator_loss,policy_objective,mode_coverage,mode_distance";
  for (auto k : horizons) h += ",compounding_h" + std::to_string(k);
  return h;
}

std::string metrics_line(const MetricsRow& r) {
  std::string s = std::to_string(r.epoch) + "," + std::to_string(r.seed) + "," + fmt(r.training_error) + "," +
                  fmt(r.discriminator_loss) + "," + fmt(r.policy_objective) + "," + fmt(r.mode_coverage) + "," +
                  fmt(r.mode_distance);
  for (double v : r.compounding) s += "," + fmt(v);
  return s;
}

bool TrainResult::all_ok() const {
  for (const auto& s : seeds) {
    if (!s.ok) return false;
  }
  return !seeds.empty();
}

SeedResult train_seed(const RunConfig& cfg, std::uint64_t seed) {
  SeedResult res;
  res.seed = seed;
  const auto dir = std::filesystem::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
  std::filesystem::create_directories(dir);
  res.metrics_path = dir / "metrics.csv";
  res.checkpoint_path = dir / "best.ckpt";

  auto env = make_environment(cfg.env);
  const auto& spec = env->spec();
  const auto norm = fit_normalizer(*env);
  Rng root(seed);
  Rng init_rng = root.fork(1);
  Rng roll_rng = root.fork(2);
  Rng disc_rng = root.fork(3);
  Rng sac_rng = root.fork(4);
  Rng val_pick = root.fork(5);
  const std::uint64_t val_seed = root.next_u64();
  const std::uint64_t eval_seed = root.next_u64();
  const std::uint64_t alpha_seed = root.next_u64();
  const std::uint64_t buffer_alpha_seed = root.next_u64();

  Agent agent = make_agent(cfg, spec, norm, init_rng);
  const auto modes = env->mode_references();
  std::vector<envs::Trajectory> val_experts;
  for (std::size_t k = 0; k < cfg.val_episodes; ++k) val_experts.push_back(env->sample_expert(val_pick));
  std::vector<envs::Trajectory> held;
  if (!cfg.horizons.empty()) held = held_out_dataset(cfg.env, cfg.val_episodes, seed);
  const bool bc = cfg.method == "bc";

  auto evaluate = [&](std::size_t epoch) {
    MetricsRow row;
    row.epoch = epoch;
    row.seed = seed;
    Rng vr(val_seed);
    RolloutOptions vo;
    vo.deterministic = bc;
    vo.record_transitions = false;
    auto ro = collect_rollouts_from(agent.policy, *env, norm, val_experts, vo, vr);
    row.training_error = modes.empty() ? paired_error(ro.generated, ro.experts) : training_error(ro.generated, modes);
    if (modes.size() >= 2) {
      auto cov = mode_coverage(ro.generated, modes);
      row.mode_coverage = *std::min_element(cov.frequency.begin(), cov.frequency.end());
      row.mode_distance = cov.mean_distance;
    } else {
      row.mode_coverage = std::numeric_limits<double>::quiet_NaN();
      row.mode_distance = std::numeric_limits<double>::quiet_NaN();
    }
    if (!cfg.horizons.empty()) {
      GraphController ctrl(agent.policy, true, eval_seed);
      row.compounding = compounding_error(ctrl, *env, norm, held, cfg.noise_sigma, cfg.horizons, cfg.eval_prefix,
                                          eval_seed);
    }
    return row;
  };

  std::ofstream csv(res.metrics_path);
  if (!csv) throw Error("train: cannot write '" + res.metrics_path.string() + "'");
  csv << metrics_header(cfg.horizons) << "\n";

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto row0 = evaluate(0);
  row0.discriminator_loss = nan;
  row0.policy_objective = nan;
  csv << metrics_line(row0) << "\n";
  res.initial_error = row0.training_error;
  res.best_error = row0.training_error;
  res.final_error = row0.training_error;
  if (cfg.write_checkpoints) save_agent(res.checkpoint_path, agent, cfg, spec, {seed, 0, row0.training_error});

  const auto sched = curriculum::CurriculumSchedule::from_fraction(
      cfg.curriculum.enabled ? cfg.curriculum.beta_fraction : 0.0, cfg.epochs, cfg.curriculum.base);
  ReplayBuffer buffer(cfg.sac.buffer_capacity);
  SacOptimizers sac_opt(cfg.sac);
  nn::AdamState disc_opt(nn::AdamConfig{cfg.disc.lr});
  nn::AdamState bc_enc(nn::AdamConfig{cfg.bc_lr});
  nn::AdamState bc_actor(nn::AdamConfig{cfg.bc_lr});
  disc::AlphaSampler sampler(cfg.disc.alpha_mode, alpha_seed);
  disc::AlphaSampler buffer_sampler(cfg.disc.alpha_mode, buffer_alpha_seed);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double freq = curriculum::intervention_frequency(sched, static_cast<double>(epoch - 1));
    MetricsRow row;
    if (!bc) {
      RolloutOptions ro;
      ro.forcing_freq = freq;
      auto rolls = collect_rollouts(agent.policy, *env, norm, cfg.episodes_per_epoch, ro, roll_rng);
      for (auto& t : rolls.transitions) buffer.push(std::move(t));
      std::vector<envs::Trajectory> gd;
      std::vector<envs::Trajectory> ed;
      for (std::size_t b = 0; b < rolls.generated.size(); ++b) {
        gd.push_back(norm.apply(rolls.generated[b]));
        ed.push_back(norm.apply(rolls.experts[b]));
      }
      auto trace = discriminator_epoch(agent.disc, disc_opt, gd, ed, sampler, cfg.disc.steps_per_epoch,
                                       cfg.disc.pairs_per_step, disc_rng);
      std::vector<envs::Trajectory> mixed;
      std::vector<double> alphas;
      for (std::size_t b = 0; b < rolls.generated.size(); ++b) {
        const double a = buffer_sampler.sample();
        mixed.push_back(disc::interpolate(rolls.generated[b], rolls.experts[b], a).traj);
        alphas.push_back(a);
      }
      for (auto& t : trajectory_transitions(agent.policy, *env, norm, mixed, Source::interpolated, alphas)) {
        buffer.push(std::move(t));
      }
      std::vector<double> objective;
      std::vector<double> critic;
      std::vector<double> rewards;
      std::vector<double> mus;
      std::vector<double> sigmas;
      for (std::size_t u = 0; u < cfg.sac.updates_per_epoch; ++u) {
        auto st = sac_update(agent.policy, agent.critics, sac_opt, buffer, agent.disc, norm, cfg.sac, sac_rng);
        if (st.skipped) {
          spdlog::warn("seed {} epoch {}: buffer holds {} < batch {}, SAC update skipped", seed, epoch,
                       buffer.size(), cfg.sac.batch);
          break;
        }
        objective.push_back(-st.actor_loss);
        critic.push_back(st.critic_loss);
        rewards.push_back(st.mean_reward);
        mus.push_back(st.mean_abs_mu);
        sigmas.push_back(st.mean_sigma);
      }
      spdlog::debug("seed {} epoch {}: disc loss {:.4g}, critic loss {:.4g}, mean reward {:.4g}, |mu| {:.3g}, "
                    "sigma {:.3g}, buffer {}",
                    seed, epoch, mean_of(trace), mean_of(critic), mean_of(rewards), mean_of(mus), mean_of(sigmas),
                    buffer.size());
      row = evaluate(epoch);
      row.discriminator_loss = mean_of(trace);
      row.policy_objective = mean_of(objective);
    } else {
      std::vector<double> losses;
      for (std::size_t u = 0; u < std::max<std::size_t>(1, cfg.sac.updates_per_epoch); ++u) {
        std::vector<envs::Trajectory> batch;
        for (std::size_t k = 0; k < cfg.episodes_per_epoch; ++k) batch.push_back(env->sample_expert(roll_rng));
        ad::Tape tape;
        agent.policy.encoder_params().zero_grad();
        agent.policy.actor_params().zero_grad();
        auto loss = bc_loss(agent.policy, norm, batch, freq, roll_rng);
        tape.backward(loss);
        nn::adam_step(bc_enc, agent.policy.encoder_params());
        nn::adam_step(bc_actor, agent.policy.actor_params());
        losses.push_back(loss.item());
      }
      row = evaluate(epoch);
      row.discriminator_loss = nan;
      row.policy_objective = -mean_of(losses);
    }
    csv << metrics_line(row) << "\n";
    csv.flush();
    res.epochs_run = epoch;
    res.final_error = row.training_error;
    if (!res.epochs_to_threshold && row.training_error < cfg.threshold_fraction * res.initial_error) {
      res.epochs_to_threshold = epoch;
    }
    if (row.training_error < res.best_error) {
      res.best_error = row.training_error;
      res.best_epoch = epoch;
      since_best = 0;
      if (cfg.write_checkpoints) save_agent(res.checkpoint_path, agent, cfg, spec, {seed, epoch, row.training_error});
    } else if (++since_best >= cfg.patience) {
      spdlog::info("seed {}: no improvement for {} epochs, stopping at epoch {}", seed, cfg.patience, epoch);
      break;
    }
    if (epoch % 10 == 0) {
      spdlog::info("seed {} epoch {}: training_error {:.4g} (best {:.4g}), forcing {:.3f}", seed, epoch,
                   row.training_error, res.best_error, freq);
    }
  }
  res.ok = true;
  return res;
}

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  {
    std::ofstream snap(std::filesystem::path(cfg.output_dir) / "config.json");
    if (!snap) throw ConfigError("cannot write config snapshot to '" + cfg.output_dir + "'");
    snap << run_config_to_json(cfg) << "\n";
  }
  TrainResult out;
  for (auto seed : cfg.seeds) {
    try {
      out.seeds.push_back(train_seed(cfg, seed));
      const auto& r = out.seeds.back();
      spdlog::info("seed {}: initial {:.4g}, best {:.4g} at epoch {}", seed, r.initial_error, r.best_error,
                   r.best_epoch);
    } catch (const std::exception& e) {
      SeedResult r;
      r.seed = seed;
      r.ok = false;
      r.error = e.what();
      spdlog::error("seed {} aborted: {}", seed, e.what());
      out.seeds.push_back(std::move(r));
    }
  }
  return out;
}

RunConfig with_override(const RunConfig& cfg, const std::string& param, const std::string& value) {
  RunConfig c = cfg;
  if (param == "alpha_range") {
    if (value == "0:1") {
      c.disc.alpha_mode = disc::AlphaMode::positive_unit;
    } else if (value == "-1:1") {
      c.disc.alpha_mode = disc::AlphaMode::symmetric;
    } else if (value == "-1:1.5") {
      c.disc.alpha_mode = disc::AlphaMode::extended;
    } else {
      try {
        c.disc.alpha_mode = disc::parse_alpha_mode(value);
      } catch (const Error&) {
        throw ConfigError("alpha_range value must be 0:1, -1:1, -1:1.5 or a mode name, got '" + value + "'");
      }
    }
  } else if (param == "beta") {
    double f = 0.0;
    try {
      std::size_t used = 0;
      f = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("beta value must be a number, got '" + value + "'");
    }
    if (f < 0.0) throw ConfigError("beta fraction must be >= 0");
    c.curriculum.enabled = f > 0.0;
    c.curriculum.beta_fraction = f;
  } else {
    throw ConfigError("unknown ablation parameter '" + param + "' (expected alpha_range or beta)");
  }
  std::string tag = value;
  for (auto& ch : tag) {
    if (ch == ':' || ch == '/') ch = '_';
  }
  c.output_dir = (std::filesystem::path(cfg.output_dir) / (param + "_" + tag)).string();
  return c;
}

}  // namespace ssmail::trainer
