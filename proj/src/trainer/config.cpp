#include "ssmail/trainer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ssmail/common/error.hpp"

namespace ssmail::trainer {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

void SACConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma must lie in (0, 1)");
  if (!(entropy >= 0.0)) throw ConfigError("sac.entropy must be >= 0");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("sac.polyak must lie in [0, 1]");
  if (batch == 0) throw ConfigError("sac.batch must be positive");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw ConfigError("sac learning rates must be positive");
  if (buffer_capacity < batch) throw ConfigError("sac.buffer_capacity must be >= sac.batch");
}

void RunConfig::validate() const {
  if (method != "ail" && method != "bc") throw ConfigError("method must be 'ail' or 'bc', got '" + method + "'");
  if (env.name != "yjunction" && env.name != "orbit" && env.name != "csv") {
    throw ConfigError("env.name must be yjunction, orbit or csv, got '" + env.name + "'");
  }
  if (env.name == "csv" && env.path.empty()) throw ConfigError("env.path is required for csv datasets");
  if (env.name == "orbit" && env.episodes < 2) throw ConfigError("env.episodes must be >= 2");
  if (!(env.v_max > 0.0)) throw ConfigError("env.v_max must be positive");
  sac.validate();
  if (disc.hidden.empty()) throw ConfigError("disc.hidden must list at least one width");
  if (!(disc.lr > 0.0)) throw ConfigError("disc.lr must be positive");
  if (disc.pairs_per_step == 0) throw ConfigError("disc.pairs_per_step must be positive");
  if (!(disc.two_timescale_ratio >= 0.0)) throw ConfigError("disc.two_timescale_ratio must be >= 0");
  if (method == "ail" && static_cast<double>(disc.steps_per_epoch) <
                             disc.two_timescale_ratio * static_cast<double>(sac.updates_per_epoch)) {
    throw ConfigError("disc.steps_per_epoch must be >= two_timescale_ratio * sac.updates_per_epoch");
  }
  if (!(curriculum.beta_fraction >= 0.0)) throw ConfigError("curriculum.beta_fraction must be >= 0");
  if (!(curriculum.base > 1.0)) throw ConfigError("curriculum.base must exceed 1");
  if (hidden == 0 || hidden_layers == 0) throw ConfigError("hidden and hidden_layers must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (episodes_per_epoch == 0 || val_episodes == 0) throw ConfigError("episode counts must be positive");
  if (!(threshold_fraction > 0.0)) throw ConfigError("threshold_fraction must be positive");
  if (!(bc_lr > 0.0)) throw ConfigError("bc_lr must be positive");
  if (eval_prefix == 0) throw ConfigError("eval_prefix must be positive");
  for (auto h : horizons) {
    if (h == 0) throw ConfigError("horizons must be positive");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw ConfigError("output_dir '" + output_dir + "' is not writable: " + ec.message());
  const auto probe = std::filesystem::path(output_dir) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output_dir '" + output_dir + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  reject_unknown(j, "", {"method", "env", "disc", "sac", "curriculum", "hidden", "hidden_layers", "temperature",
                         "seeds", "epochs", "patience", "episodes_per_epoch", "val_episodes", "threshold_fraction",
                         "bc_lr", "horizons", "eval_prefix", "noise_sigma", "output_dir", "write_checkpoints"});
  RunConfig c;
  read(j, "method", c.method);
  if (j.contains("env")) {
    const auto& e = j["env"];
    reject_unknown(e, "env", {"name", "path", "episodes", "data_seed", "v_max"});
    read(e, "name", c.env.name);
    read(e, "path", c.env.path);
    read(e, "episodes", c.env.episodes);
    read(e, "data_seed", c.env.data_seed);
    read(e, "v_max", c.env.v_max);
  }
  if (j.contains("disc")) {
    const auto& d = j["disc"];
    reject_unknown(d, "disc", {"objective", "alpha_mode", "hidden", "lr", "steps_per_epoch", "pairs_per_step",
                               "gp_coeff", "two_timescale_ratio"});
    try {
      if (d.contains("objective")) c.disc.objective = disc::parse_objective(d["objective"].get<std::string>());
      if (d.contains("alpha_mode")) c.disc.alpha_mode = disc::parse_alpha_mode(d["alpha_mode"].get<std::string>());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad disc enum: ") + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    read(d, "hidden", c.disc.hidden);
    read(d, "lr", c.disc.lr);
    read(d, "steps_per_epoch", c.disc.steps_per_epoch);
    read(d, "pairs_per_step", c.disc.pairs_per_step);
    read(d, "gp_coeff", c.disc.gp_coeff);
    read(d, "two_timescale_ratio", c.disc.two_timescale_ratio);
  }
  if (j.contains("sac")) {
    const auto& s = j["sac"];
    reject_unknown(s, "sac", {"gamma", "entropy", "polyak", "batch", "actor_lr", "critic_lr", "updates_per_epoch",
                              "buffer_capacity"});
    read(s, "gamma", c.sac.gamma);
    read(s, "entropy", c.sac.entropy);
    read(s, "polyak", c.sac.polyak);
    read(s, "batch", c.sac.batch);
    read(s, "actor_lr", c.sac.actor_lr);
    read(s, "critic_lr", c.sac.critic_lr);
    read(s, "updates_per_epoch", c.sac.updates_per_epoch);
    read(s, "buffer_capacity", c.sac.buffer_capacity);
  }
  if (j.contains("curriculum")) {
    const auto& k = j["curriculum"];
    reject_unknown(k, "curriculum", {"enabled", "beta_fraction", "base"});
    read(k, "enabled", c.curriculum.enabled);
    read(k, "beta_fraction", c.curriculum.beta_fraction);
    read(k, "base", c.curriculum.base);
  }
  read(j, "hidden", c.hidden);
  read(j, "hidden_layers", c.hidden_layers);
  read(j, "temperature", c.temperature);
  read(j, "seeds", c.seeds);
  read(j, "epochs", c.epochs);
  read(j, "patience", c.patience);
  read(j, "episodes_per_epoch", c.episodes_per_epoch);
  read(j, "val_episodes", c.val_episodes);
  read(j, "threshold_fraction", c.threshold_fraction);
  read(j, "bc_lr", c.bc_lr);
  read(j, "horizons", c.horizons);
  read(j, "eval_prefix", c.eval_prefix);
  read(j, "noise_sigma", c.noise_sigma);
  read(j, "output_dir", c.output_dir);
  read(j, "write_checkpoints", c.write_checkpoints);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["method"] = c.method;
  j["env"] = {{"name", c.env.name},
              {"path", c.env.path},
              {"episodes", c.env.episodes},
              {"data_seed", c.env.data_seed},
              {"v_max", c.env.v_max}};
  j["disc"] = {{"objective", disc::to_string(c.disc.objective)},
               {"alpha_mode", disc::to_string(c.disc.alpha_mode)},
               {"hidden", c.disc.hidden},
               {"lr", c.disc.lr},
               {"steps_per_epoch", c.disc.steps_per_epoch},
               {"pairs_per_step", c.disc.pairs_per_step},
               {"gp_coeff", c.disc.gp_coeff},
               {"two_timescale_ratio", c.disc.two_timescale_ratio}};
  j["sac"] = {{"gamma", c.sac.gamma},
              {"entropy", c.sac.entropy},
              {"polyak", c.sac.polyak},
              {"batch", c.sac.batch},
              {"actor_lr", c.sac.actor_lr},
              {"critic_lr", c.sac.critic_lr},
              {"updates_per_epoch", c.sac.updates_per_epoch},
              {"buffer_capacity", c.sac.buffer_capacity}};
  j["curriculum"] = {
      {"enabled", c.curriculum.enabled}, {"beta_fraction", c.curriculum.beta_fraction}, {"base", c.curriculum.base}};
  j["hidden"] = c.hidden;
  j["hidden_layers"] = c.hidden_layers;
  j["temperature"] = c.temperature;
  j["seeds"] = c.seeds;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["episodes_per_epoch"] = c.episodes_per_epoch;
  j["val_episodes"] = c.val_episodes;
  j["threshold_fraction"] = c.threshold_fraction;
  j["bc_lr"] = c.bc_lr;
  j["horizons"] = c.horizons;
  j["eval_prefix"] = c.eval_prefix;
  j["noise_sigma"] = c.noise_sigma;
  j["output_dir"] = c.output_dir;
  j["write_checkpoints"] = c.write_checkpoints;
  return j.dump(2);
}

}  // namespace ssmail::trainer
