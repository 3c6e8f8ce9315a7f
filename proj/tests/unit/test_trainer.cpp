#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"
#include "ssmail/envs/yjunction.hpp"
#include "ssmail/trainer/config.hpp"
#include "ssmail/trainer/metrics.hpp"
#include "ssmail/trainer/replay_buffer.hpp"
#include "ssmail/trainer/rollout.hpp"
#include "ssmail/trainer/trainer.hpp"
#include "ssmail/trainer/updates.hpp"
#include "support/gradcheck.hpp"

using namespace ssmail;
using namespace ssmail::trainer;
using ssmail::testing::grad_check;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / "ssmail_trainer_tests" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

RunConfig tiny_config(const std::string& dir) {
  RunConfig c;
  c.hidden = 8;
  c.hidden_layers = 1;
  c.disc.hidden = {16};
  c.disc.steps_per_epoch = 4;
  c.disc.two_timescale_ratio = 1.0;
  c.sac.batch = 32;
  c.sac.updates_per_epoch = 2;
  c.sac.buffer_capacity = 2000;
  c.episodes_per_epoch = 2;
  c.val_episodes = 2;
  c.epochs = 3;
  c.output_dir = dir;
  return c;
}

struct Fixture {
  envs::YJunction env;
  envs::Normalizer norm = fit_normalizer(env);
  RunConfig cfg = tiny_config("unused");
  Rng rng{11};
  Agent agent = make_agent(cfg, env.spec(), norm, rng);
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

envs::Trajectory constant_traj(std::size_t T, double x, double y, double vx, double vy) {
  envs::Trajectory tr(T, 1, 2, 2, 0.1);
  for (std::size_t t = 0; t < T; ++t) {
    tr.s(t, 0, 0) = x + vx * 0.1 * t;
    tr.s(t, 0, 1) = y + vy * 0.1 * t;
    tr.a(t, 0, 0) = vx;
    tr.a(t, 0, 1) = vy;
  }
  return tr;
}

/// Replays stored expert actions; exact on integrator data.
class ReplayController final : public Controller {
 public:
  explicit ReplayController(std::vector<envs::Trajectory> data) : data_(std::move(data)) {}
  void reset(std::size_t) override { t_ = 0; }
  std::vector<double> act(const std::vector<double>&) override {
    std::vector<double> out;
    for (const auto& tr : data_) out.insert(out.end(), tr.action_at(t_).begin(), tr.action_at(t_).end());
    ++t_;
    return out;
  }

 private:
  std::vector<envs::Trajectory> data_;
  std::size_t t_ = 0;
};

}  // namespace

TEST_CASE("replay buffer evicts oldest first") {
  ReplayBuffer buf(3);
  for (int k = 0; k < 5; ++k) {
    Transition t;
    t.alpha = k;
    t.source = k % 2 ? Source::interpolated : Source::generated;
    buf.push(t);
  }
  CHECK(buf.size() == 3);
  std::vector<double> held;
  for (std::size_t i = 0; i < 3; ++i) held.push_back(buf.at(i).alpha);
  std::sort(held.begin(), held.end());
  CHECK(held == std::vector<double>{2, 3, 4});
  CHECK(buf.count(Source::interpolated) == 1);
  Rng rng(1);
  CHECK(buf.sample(10, rng).size() == 10);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);
}

TEST_CASE("soft target arithmetic") {
  CHECK(sac_target(1.0, 0.99, 0.0, 0.0, 0.01, false) == 1.0);
  CHECK(sac_target(1.0, 0.5, 2.0, 1.0, 0.5, false) == doctest::Approx(1.0 + 0.5 * 1.5));
  CHECK(sac_target(0.3, 0.99, 5.0, 1.0, 0.1, true) == 0.3);
}

TEST_CASE("run config round trip and validation") {
  auto dir = scratch("config");
  RunConfig c = tiny_config(dir.string());
  c.seeds = {3, 4};
  c.horizons = {1, 5};
  c.disc.alpha_mode = disc::AlphaMode::extended;
  auto back = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));
  CHECK_NOTHROW(back.validate());

  CHECK_THROWS_AS(run_config_from_json(R"({"epochs": 3, "epohcs": 4})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"sac": {"gama": 0.9}})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"epochs": "many"})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("{"), ConfigError);

  auto bad = c;
  bad.sac.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.disc.steps_per_epoch = 1;
  bad.disc.two_timescale_ratio = 5.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.output_dir = "/proc/ssmail_not_writable";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("ablation overrides") {
  RunConfig c = tiny_config("out");
  CHECK(with_override(c, "alpha_range", "0:1").disc.alpha_mode == disc::AlphaMode::positive_unit);
  CHECK(with_override(c, "alpha_range", "-1:1.5").disc.alpha_mode == disc::AlphaMode::extended);
  auto off = with_override(c, "beta", "0");
  CHECK_FALSE(off.curriculum.enabled);
  auto on = with_override(c, "beta", "0.15");
  CHECK(on.curriculum.enabled);
  CHECK(on.curriculum.beta_fraction == 0.15);
  CHECK(on.output_dir != c.output_dir);
  CHECK_THROWS_AS(with_override(c, "gamma", "0.9"), ConfigError);
  CHECK_THROWS_AS(with_override(c, "beta", "x"), ConfigError);
  CHECK_THROWS_AS(with_override(c, "alpha_range", "2:3"), ConfigError);
}

TEST_CASE("rollouts: full forcing, determinism, fixed horizon") {
  Fixture f;
  RolloutOptions opts;
  opts.forcing_freq = 1.0;
  Rng r1(5);
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 3, opts, r1);
  REQUIRE(ro.generated.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(ro.generated[b].horizon == f.env.spec().horizon);
    CHECK(ro.generated[b].states == ro.experts[b].states);
  }
  CHECK(ro.transitions.size() == 3 * f.env.spec().horizon);

  opts.forcing_freq = 0.3;
  Rng a(9);
  Rng b(9);
  auto x = collect_rollouts(f.agent.policy, f.env, f.norm, 2, opts, a);
  auto y = collect_rollouts(f.agent.policy, f.env, f.norm, 2, opts, b);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(x.generated[k].states == y.generated[k].states);
    CHECK(x.generated[k].actions == y.generated[k].actions);
  }

  opts.forcing_freq = 0.0;
  Rng c(2);
  auto free = collect_rollouts(f.agent.policy, f.env, f.norm, 2, opts, c);
  for (const auto& g : free.generated) {
    for (std::size_t t = 0; t + 1 < g.horizon; ++t) {
      auto next = f.env.step(g.state_at(t), g.action_at(t));
      for (std::size_t k = 0; k < next.size(); ++k) CHECK(g.state_at(t + 1)[k] == next[k]);
    }
  }
}

TEST_CASE("rollouts reject mismatched dimensions") {
  Fixture f;
  envs::YJunctionConfig yc;
  yc.start_y = {-1.0, 0.0};
  envs::YJunction two(yc);
  Rng rng(1);
  CHECK_THROWS_AS(collect_rollouts(f.agent.policy, two, f.norm, 1, {}, rng), Error);
}

TEST_CASE("transitions are dynamically consistent and carry encoder memory") {
  Fixture f;
  Rng rng(3);
  auto ex = f.env.sample_expert(rng);
  auto trs = trajectory_transitions(f.agent.policy, f.env, f.norm, {ex}, Source::interpolated, {0.4});
  REQUIRE(trs.size() == ex.horizon);
  const std::size_t hw = 6 * f.cfg.hidden;
  for (std::size_t t = 0; t < ex.horizon; ++t) {
    auto next = f.env.step(ex.state_at(t), ex.action_at(t));
    f.norm.normalize(next);
    for (std::size_t k = 0; k < next.size(); ++k) CHECK(trs[t].x_next[k] == doctest::Approx(next[k]).epsilon(1e-12));
    CHECK(trs[t].enc_h.size() == hw);
    CHECK(trs[t].alpha == 0.4);
  }
  for (float v : trs[0].enc_h) CHECK(v == 0.0f);
  bool moved = false;
  for (float v : trs[5].enc_h) moved = moved || v != 0.0f;
  CHECK(moved);
}

TEST_CASE("discriminator epoch: zero steps, trend, gail range") {
  Fixture f;
  Rng rng(4);
  RolloutOptions opts;
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 8, opts, rng);
  std::vector<envs::Trajectory> g;
  std::vector<envs::Trajectory> e;
  for (std::size_t b = 0; b < 8; ++b) {
    g.push_back(f.norm.apply(ro.generated[b]));
    e.push_back(f.norm.apply(ro.experts[b]));
  }
  nn::AdamState opt(nn::AdamConfig{1e-3});
  disc::AlphaSampler sampler(disc::AlphaMode::symmetric, 1);
  auto before = f.agent.disc.params().clone();
  CHECK(discriminator_epoch(f.agent.disc, opt, g, e, sampler, 0, 4, rng).empty());
  for (const auto& [name, t] : f.agent.disc.params()) {
    auto b = before.get(name).data();
    CHECK(std::equal(t.data().begin(), t.data().end(), b.begin()));
  }

  auto trace = discriminator_epoch(f.agent.disc, opt, g, e, sampler, 500, 4, rng);
  REQUIRE(trace.size() == 500);
  const double first = std::accumulate(trace.begin(), trace.begin() + 10, 0.0) / 10;
  const double last = std::accumulate(trace.end() - 10, trace.end(), 0.0) / 10;
  CHECK(last < first);

  disc::DiscConfig dc;
  dc.objective = disc::Objective::gail_bce;
  dc.hidden = {16};
  Rng init(8);
  disc::Discriminator gail(dc, 6, 6, init);
  nn::AdamState gopt(nn::AdamConfig{1e-2});
  discriminator_epoch(gail, gopt, g, e, sampler, 200, 4, rng);
  auto batch = disc::make_batch(g);
  auto scores = disc::d_forward(gail, batch.states, batch.actions);
  for (double s : scores.data()) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
  CHECK_THROWS_AS(discriminator_epoch(f.agent.disc, opt, g, {}, sampler, 1, 4, rng), Error);
}

TEST_CASE("rewards are read from the live discriminator") {
  Fixture f;
  Rng rng(6);
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 2, {}, rng);
  ReplayBuffer buf(1000);
  for (auto& t : ro.transitions) buf.push(t);
  auto cfg = f.cfg.sac;
  cfg.batch = 16;
  SacOptimizers opt(cfg);
  auto set_output = [&](double v) {
    for (auto& [name, t] : f.agent.disc.params()) {
      for (auto& x : t.mutable_data()) x = 0.0;
    }
    const auto& spec = f.agent.disc.spec();
    f.agent.disc.params().get(spec.bias(spec.layers() - 1)).mutable_data()[0] = v;
  };
  set_output(0.0);
  CHECK(sac_update(f.agent.policy, f.agent.critics, opt, buf, f.agent.disc, f.norm, cfg, rng).mean_reward == 0.0);
  set_output(0.7);
  CHECK(sac_update(f.agent.policy, f.agent.critics, opt, buf, f.agent.disc, f.norm, cfg, rng).mean_reward ==
        doctest::Approx(0.7).epsilon(1e-12));

  ReplayBuffer small(1000);
  small.push(ro.transitions.front());
  CHECK(sac_update(f.agent.policy, f.agent.critics, opt, small, f.agent.disc, f.norm, cfg, rng).skipped);
}

TEST_CASE("critic targets with zero critics and policy entropy off reduce to the reward") {
  Fixture f;
  Rng rng(7);
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 1, {}, rng);
  std::vector<const Transition*> items;
  for (std::size_t k = 0; k < 8; ++k) items.push_back(&ro.transitions[k]);
  auto batch = make_sac_batch(items, f.agent.policy.config(), f.norm);
  for (auto* set : {&f.agent.critics.online[0], &f.agent.critics.online[1], &f.agent.critics.target[0],
                    &f.agent.critics.target[1]}) {
    for (auto& [name, t] : *set) {
      for (auto& x : t.mutable_data()) x = 0.0;
    }
  }
  SACConfig cfg;
  cfg.entropy = 0.0;
  auto r = disc::reward(f.agent.disc, batch.disc_states, batch.disc_actions);
  double expect = 0.0;
  for (double v : r) expect += 2.0 * v * v;
  expect /= static_cast<double>(r.size());
  ad::NoGradGuard ng;
  CHECK(critic_loss(f.agent.policy, f.agent.critics, f.agent.disc, batch, cfg, rng).item() ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("actor gradient follows dQ/da for a narrow policy") {
  Fixture f;
  Rng rng(12);
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 1, {}, rng);
  std::vector<const Transition*> items;
  for (std::size_t k = 0; k < 16; ++k) items.push_back(&ro.transitions[k * 3]);
  auto batch = make_sac_batch(items, f.agent.policy.config(), f.norm);
  auto& actor = f.agent.policy.actor_params();
  for (auto& [name, t] : actor) {
    if (name.starts_with("actor.sigma.b")) {
      for (auto& v : t.mutable_data()) v = -60.0;
    }
  }
  const auto& names = actor.names();
  std::string mu_bias;
  for (const auto& n : names) {
    if (n.starts_with("actor.mu.b")) mu_bias = n;
  }
  REQUIRE(!mu_bias.empty());

  Rng a(44);
  actor.zero_grad();
  {
    ad::Tape tape;
    tape.backward(actor_loss(f.agent.policy, f.agent.critics, batch, 0.0, a));
  }
  std::vector<double> g_actor(actor.get(mu_bias).grad().begin(), actor.get(mu_bias).grad().end());

  // independent route: dQ/da at the policy's action, chained through the squash by hand
  Rng b(44);
  auto dist = f.agent.policy.encode_step(batch.enc, batch.x).second;
  ad::Tensor z;
  ad::Tensor u;
  ad::Tensor act_values;
  {
    ad::NoGradGuard ng;
    z = policy::sample_edges(dist, true, b);
    auto out = f.agent.policy.act(batch.x, z, b);
    u = out.pre_squash;
    act_values = out.action;
  }
  auto leaf = ad::Tensor(act_values.shape(), act_values.values(), true);
  {
    ad::Tape tape;
    auto q = minimum(f.agent.critics.net.q(f.agent.critics.online[0], batch.x, z, leaf),
                     f.agent.critics.net.q(f.agent.critics.online[1], batch.x, z, leaf));
    tape.backward(ad::mean(q));
  }
  const double vmax = f.agent.policy.config().v_max;
  std::vector<double> g_direct(2, 0.0);
  for (std::size_t r = 0; r < leaf.dim(0); ++r) {
    for (std::size_t d = 0; d < 2; ++d) {
      const double th = std::tanh(u.data()[r * 2 + d]);
      g_direct[d] -= leaf.grad()[r * 2 + d] * vmax * (1.0 - th * th);
    }
  }
  const double dot = g_actor[0] * g_direct[0] + g_actor[1] * g_direct[1];
  const double na = std::hypot(g_actor[0], g_actor[1]);
  const double nd = std::hypot(g_direct[0], g_direct[1]);
  REQUIRE(na > 0.0);
  CHECK(dot / (na * nd) > 0.99);
}

TEST_CASE("polyak bound holds through a full update") {
  Fixture f;
  Rng rng(13);
  auto ro = collect_rollouts(f.agent.policy, f.env, f.norm, 2, {}, rng);
  ReplayBuffer buf(1000);
  for (auto& t : ro.transitions) buf.push(t);
  auto cfg = f.cfg.sac;
  cfg.batch = 16;
  cfg.polyak = 0.9;
  f.agent.critics.polyak_rho = 0.9;
  SacOptimizers opt(cfg);
  for (int k = 0; k < 3; ++k) sac_update(f.agent.policy, f.agent.critics, opt, buf, f.agent.disc, f.norm, cfg, rng);
  auto before = f.agent.critics.target[0].clone();
  sac_update(f.agent.policy, f.agent.critics, opt, buf, f.agent.disc, f.norm, cfg, rng);
  for (const auto& [name, t] : f.agent.critics.target[0]) {
    auto b = before.get(name).data();
    auto o = f.agent.critics.online[0].get(name).data();
    for (std::size_t k = 0; k < t.numel(); ++k) {
      CHECK(std::abs(t.data()[k] - b[k]) <= 0.1 * std::abs(o[k] - b[k]) + 1e-12);
    }
  }
}

TEST_CASE("training error examples") {
  auto m0 = constant_traj(2, 0.0, 0.0, 1.0, 0.0);
  auto m1 = constant_traj(2, 0.0, 0.0, -1.0, 0.0);
  CHECK(training_error({m0}, {m0, m1}) == 0.0);
  auto mid = constant_traj(2, 0.0, 0.0, 0.0, 0.0);
  CHECK(training_error({mid}, {m0, m1}) == state_mse(mid, m0));
  CHECK(state_mse(mid, m0) == state_mse(mid, m1));
  // states (0,0),(0.1,0) vs (1,0),(1,2): squared deviations 1+0+0.81+4 over 4 entries
  envs::Trajectory g(2, 1, 2, 2);
  g.states = {0, 0, 0.1, 0};
  envs::Trajectory e(2, 1, 2, 2);
  e.states = {1, 0, 1, 2};
  CHECK(training_error({g}, {e}) == doctest::Approx(5.81 / 4).epsilon(1e-15));
  CHECK_THROWS_AS(training_error({g}, {}), Error);
  CHECK_THROWS_AS(training_error({constant_traj(3, 0, 0, 0, 0)}, {e}), Error);
}

TEST_CASE("mode coverage examples") {
  envs::YJunction env;
  auto modes = env.mode_references();
  auto cov = mode_coverage({modes[0], modes[0], modes[0]}, modes);
  CHECK(cov.frequency == std::vector<double>{1.0, 0.0});
  CHECK(cov.mean_distance == 0.0);
  cov = mode_coverage({modes[0], modes[1], modes[0], modes[1]}, modes);
  CHECK(cov.frequency == std::vector<double>{0.5, 0.5});

  // averaging the two branches keeps every agent on the trunk line
  envs::Trajectory avg = modes[0];
  for (std::size_t k = 0; k < avg.states.size(); ++k) avg.states[k] = 0.5 * (modes[0].states[k] + modes[1].states[k]);
  for (std::size_t k = 0; k < avg.actions.size(); ++k) {
    avg.actions[k] = 0.5 * (modes[0].actions[k] + modes[1].actions[k]);
  }
  CHECK(mode_coverage({avg}, modes).mean_distance > 1.0);
  CHECK_THROWS_AS(mode_coverage({avg}, {modes[0]}), Error);
}

TEST_CASE("compounding error: oracle, shape, growth") {
  envs::YJunction env;
  auto norm = fit_normalizer(env);
  Rng rng(21);
  std::vector<envs::Trajectory> data;
  for (int k = 0; k < 6; ++k) data.push_back(env.sample_expert(rng));
  std::vector<std::size_t> hs{1, 5, 20, 40};
  ReplayController oracle(data);
  auto errs = compounding_error(oracle, env, norm, data, 0.0, hs, 10, 1);
  REQUIRE(errs.size() == hs.size());
  for (double e : errs) CHECK(e < 1e-24);

  RunConfig cfg = tiny_config("unused");
  Rng init(3);
  auto agent = make_agent(cfg, env.spec(), norm, init);
  double first = 0.0;
  double last = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    GraphController ctrl(agent.policy, false, s);
    auto e = compounding_error(ctrl, env, norm, data, 0.05, {1, 40}, 10, s);
    first += e[0];
    last += e[1];
  }
  CHECK(first <= last);
  CHECK_THROWS_AS(compounding_error(oracle, env, norm, data, 0.0, {42}, 10, 1), Error);
  CHECK(compounding_error(oracle, env, norm, data, 0.0, {41}, 10, 1).size() == 1);
}

TEST_CASE("slope of a line") {
  CHECK(slope({1, 2, 3}, {1.0, 3.0, 5.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(slope({1}, {1.0}), Error);
}

TEST_CASE("landscape grid") {
  disc::DiscConfig dc;
  dc.hidden = {8};
  Rng rng(2);
  disc::Discriminator d(dc, 4, 2, rng);
  for (auto& [name, t] : d.params()) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  LandscapeSlice slice{{0, 0, 0, 0}, {0, 0}, 0, 1};
  auto grid = landscape_grid(d, slice, Region{-1, -1, 1, 1}, 7);
  CHECK(grid.size() == 49);
  for (const auto& p : grid) CHECK(p.score == 0.0);
  CHECK(grid.front().x == -1.0);
  CHECK(grid.back().y == 1.0);
  CHECK_THROWS_AS(landscape_grid(d, slice, Region{0, -1, 0, 1}, 7), Error);
  CHECK_THROWS_AS(landscape_grid(d, slice, Region{-1, -1, 1, 1}, 1), Error);
  auto path = scratch("grid") / "grid.csv";
  write_grid_csv(path, grid);
  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 50);
}

TEST_CASE("multi-step BC loss has exact gradients and decreases") {
  envs::YJunction env;
  auto norm = fit_normalizer(env);
  RunConfig cfg = tiny_config("unused");
  cfg.hidden = 4;
  Rng rng(5);
  auto agent = make_agent(cfg, env.spec(), norm, rng);
  std::vector<envs::Trajectory> data;
  for (int k = 0; k < 2; ++k) {
    auto e = env.sample_expert(rng);
    envs::Trajectory shortened(6, e.agents, 2, 2, e.dt);
    std::copy_n(e.states.begin(), shortened.states.size(), shortened.states.begin());
    std::copy_n(e.actions.begin(), shortened.actions.size(), shortened.actions.begin());
    data.push_back(shortened);
  }
  std::vector<ad::Tensor> params;
  for (auto& [n, t] : agent.policy.encoder_params()) params.push_back(t);
  for (auto& [n, t] : agent.policy.actor_params()) params.push_back(t);
  auto res = grad_check(
      params,
      [&] {
        Rng fixed(9);
        return bc_loss(agent.policy, norm, data, 0.5, fixed);
      },
      1e-6, 1e-3);
  CHECK_MESSAGE(res.ok, res.worst);

  nn::AdamState enc(nn::AdamConfig{3e-3});
  nn::AdamState act(nn::AdamConfig{3e-3});
  std::vector<double> losses;
  for (int step = 0; step < 60; ++step) {
    ad::Tape tape;
    agent.policy.encoder_params().zero_grad();
    agent.policy.actor_params().zero_grad();
    Rng fixed(step);
    auto loss = bc_loss(agent.policy, norm, data, 0.0, fixed);
    tape.backward(loss);
    nn::adam_step(enc, agent.policy.encoder_params());
    nn::adam_step(act, agent.policy.actor_params());
    losses.push_back(loss.item());
  }
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("clip is the identity inside the bound") {
  auto x = ad::Tensor({1, 4}, {-2.0, -0.5, 0.5, 3.0}, true);
  auto y = clip(x, 1.5);
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{-1.5, -0.5, 0.5, 1.5});
}

TEST_CASE("checkpoint round trip reproduces policy outputs bit-exactly") {
  auto dir = scratch("ckpt");
  Fixture f;
  auto path = dir / "agent.ckpt";
  save_agent(path, f.agent, f.cfg, f.env.spec(), {7, 12, 0.25});
  auto loaded = load_agent(path);
  CHECK(loaded.info.seed == 7);
  CHECK(loaded.info.epoch == 12);
  CHECK(loaded.info.val_error == 0.25);
  CHECK(loaded.agent.norm.lo() == f.norm.lo());
  CHECK(loaded.agent.norm.hi() == f.norm.hi());
  for (bool det : {false, true}) {
    RolloutOptions opts;
    opts.deterministic = det;
    opts.forcing_freq = 0.2;
    Rng a(31);
    Rng b(31);
    auto x = collect_rollouts(f.agent.policy, f.env, f.norm, 3, opts, a);
    auto y = collect_rollouts(loaded.agent.policy, f.env, loaded.agent.norm, 3, opts, b);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(x.generated[k].states == y.generated[k].states);
      CHECK(x.generated[k].actions == y.generated[k].actions);
    }
  }
  auto batch = disc::make_batch(std::vector<envs::Trajectory>{f.norm.apply(f.env.mode_references()[0])});
  CHECK(disc::reward(f.agent.disc, batch.states, batch.actions) ==
        disc::reward(loaded.agent.disc, batch.states, batch.actions));
  CHECK_THROWS_AS(load_agent(dir / "missing.ckpt"), Error);
}

TEST_CASE("train writes per-seed artifacts and is deterministic") {
  auto dir = scratch("train");
  RunConfig c = tiny_config((dir / "a").string());
  c.seeds = {1, 2};
  c.horizons = {1, 10};
  auto res = train(c);
  REQUIRE(res.all_ok());
  REQUIRE(res.seeds.size() == 2);
  for (const auto& s : res.seeds) {
    CHECK(std::filesystem::exists(s.metrics_path));
    CHECK(std::filesystem::exists(s.checkpoint_path));
    CHECK(s.epochs_run == 3);
  }
  CHECK(std::filesystem::exists(dir / "a" / "config.json"));
  auto text = slurp(res.seeds[0].metrics_path);
  CHECK(text.rfind(metrics_header(c.horizons) + "\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header, epoch 0, three epochs

  RunConfig again = c;
  again.output_dir = (dir / "b").string();
  auto res2 = train(again);
  REQUIRE(res2.all_ok());
  for (std::size_t k = 0; k < 2; ++k) CHECK(slurp(res.seeds[k].metrics_path) == slurp(res2.seeds[k].metrics_path));
  CHECK(slurp(res.seeds[0].metrics_path) != slurp(res.seeds[1].metrics_path));
}

TEST_CASE("train with the BC arm") {
  auto dir = scratch("train_bc");
  RunConfig c = tiny_config(dir.string());
  c.method = "bc";
  auto res = train(c);
  REQUIRE(res.all_ok());
  auto loaded = load_agent(res.seeds[0].checkpoint_path);
  CHECK(loaded.config.method == "bc");
}

TEST_CASE("a failing seed is reported without stopping the others") {
  auto dir = scratch("train_fail");
  RunConfig c = tiny_config(dir.string());
  c.env.name = "csv";
  c.env.path = (dir / "missing.csv").string();
  c.seeds = {0, 1};
  auto res = train(c);
  CHECK_FALSE(res.all_ok());
  REQUIRE(res.seeds.size() == 2);
  for (const auto& s : res.seeds) {
    CHECK_FALSE(s.ok);
    CHECK(!s.error.empty());
  }
  c.epochs = 0;
  CHECK_THROWS_AS(train(c), ConfigError);
}
