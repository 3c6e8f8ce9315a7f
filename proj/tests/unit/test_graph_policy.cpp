#include <doctest.h>

#include <cmath>

#include "ssmail/autodiff/ops.hpp"
#include "ssmail/autodiff/tape.hpp"
#include "ssmail/common/error.hpp"
#include "ssmail/graph_policy/graph_policy.hpp"
#include "support/gradcheck.hpp"

using namespace ssmail;
using namespace ssmail::policy;
using ssmail::testing::grad_check;
using ssmail::testing::random_tensor;

namespace {

PolicyConfig small_config() {
  PolicyConfig cfg;
  cfg.hidden = 6;
  cfg.hidden_layers = 1;
  return cfg;
}

void fill(nn::ParameterSet& p, double v) {
  for (auto& [name, t] : p) {
    for (auto& x : t.mutable_data()) x = v;
  }
}

std::vector<ad::Tensor> tensors_of(nn::ParameterSet& p) {
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : p) out.push_back(t);
  return out;
}

/// Row permutation for pair rows: new pair (a, b) holds old pair (perm[a], perm[b]).
std::vector<std::size_t> edge_perm(const nn::PairIndex& g, const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> out(g.edges_per_graph());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = g.edge(perm[g.sender_of(e)], perm[g.receiver_of(e)]);
  return out;
}

ad::Tensor one_hot_rows(std::size_t rows, std::size_t k, std::size_t hot) {
  std::vector<double> v(rows * k, 0.0);
  for (std::size_t r = 0; r < rows; ++r) v[r * k + hot] = 1.0;
  return ad::Tensor({rows, k}, v);
}

}  // namespace

TEST_CASE("zero-weight encoder gives uniform edge distribution") {
  Rng rng(1);
  GraphPolicy pol(small_config(), rng);
  fill(pol.encoder_params(), 0.0);
  auto [state, dist] = pol.encode_step(pol.initial_state(2), random_tensor(rng, {6, 2}, -1, 1, false));
  CHECK(dist.probs.shape() == ad::Shape{12, 2});
  for (double p : dist.probs.data()) CHECK(p == 0.5);
}

TEST_CASE("edge probabilities sum to one for every ordered pair") {
  Rng rng(2);
  GraphPolicy pol(small_config(), rng);
  auto s = pol.initial_state(1);
  for (int t = 0; t < 5; ++t) {
    auto [next, dist] = pol.encode_step(s, random_tensor(rng, {3, 2}, -1, 1, false));
    REQUIRE(dist.probs.dim(0) == 6);
    for (std::size_t e = 0; e < 6; ++e) {
      CHECK(dist.probs.data()[2 * e] + dist.probs.data()[2 * e + 1] == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(dist.probs.data()[2 * e] > 0.0);
    }
    s = next;
  }
}

TEST_CASE("encoder rejects unnormalized input") {
  Rng rng(3);
  GraphPolicy pol(small_config(), rng);
  auto x = ad::Tensor({3, 2}, {0, 0, 1.6, 0, 0, 0});
  CHECK_THROWS_AS(pol.encode_step(pol.initial_state(1), x), Error);
  auto ok = ad::Tensor({3, 2}, {0, 0, 1.5, -1.5, 0, 0});
  CHECK_NOTHROW(pol.encode_step(pol.initial_state(1), ok));
}

TEST_CASE("encoder is causal") {
  Rng rng(4);
  GraphPolicy pol(small_config(), rng);
  std::vector<ad::Tensor> xs;
  for (int t = 0; t < 6; ++t) xs.push_back(random_tensor(rng, {3, 2}, -1, 1, false));
  auto run = [&](const std::vector<ad::Tensor>& seq) {
    std::vector<std::vector<double>> out;
    auto s = pol.initial_state(1);
    for (const auto& x : seq) {
      auto [next, dist] = pol.encode_step(s, x);
      out.emplace_back(dist.probs.data().begin(), dist.probs.data().end());
      s = next;
    }
    return out;
  };
  auto base = run(xs);
  for (std::size_t changed = 1; changed < xs.size(); ++changed) {
    auto alt = xs;
    alt[changed] = random_tensor(rng, {3, 2}, -1, 1, false);
    auto got = run(alt);
    for (std::size_t t = 0; t < changed; ++t) CHECK(got[t] == base[t]);
    CHECK(got[changed] != base[changed]);
  }
}

TEST_CASE("gumbel samples: low temperature, hard one-hot, frequencies") {
  InteractionGraphSample dist;
  dist.logits = ad::Tensor({2, 3}, {0.3, -0.2, 1.0, 2.0, 0.0, -1.0});
  dist.probs = ad::softmax(dist.logits, 1);
  Rng rng(5);

  dist.temperature = 1e-4;
  for (int k = 0; k < 50; ++k) {
    auto z = sample_edges(dist, false, rng);
    for (std::size_t r = 0; r < 2; ++r) {
      double mx = 0;
      for (std::size_t c = 0; c < 3; ++c) mx = std::max(mx, z.data()[r * 3 + c]);
      CHECK(mx > 1.0 - 1e-6);
    }
  }

  dist.temperature = 0.5;
  std::vector<double> counts(6, 0.0);
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    auto z = sample_edges(dist, true, rng);
    for (std::size_t r = 0; r < 2; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = z.data()[r * 3 + c];
        CHECK((v == 0.0 || v == 1.0));
        total += v;
        counts[r * 3 + c] += v;
      }
      CHECK(total == 1.0);
    }
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(counts[i] / n - dist.probs.data()[i]) < 0.02);
}

TEST_CASE("straight-through sample passes the relaxed gradient") {
  InteractionGraphSample dist;
  dist.logits = ad::Tensor({1, 2}, {0.2, -0.1}, true);
  dist.temperature = 0.5;
  Rng a(6);
  Rng b(6);
  ad::Tape tape;
  auto w = ad::Tensor({1, 2}, {1.0, 3.0});
  auto hard = sample_edges(dist, true, a);
  tape.backward(ad::sum(ad::mul(hard, w)));
  std::vector<double> g_hard(dist.logits.grad().begin(), dist.logits.grad().end());
  dist.logits.zero_grad();
  auto soft = sample_edges(dist, false, b);
  tape.backward(ad::sum(ad::mul(soft, w)));
  for (int k = 0; k < 2; ++k) CHECK(dist.logits.grad()[k] == doctest::Approx(g_hard[k]).epsilon(1e-12));
}

TEST_CASE("null edges leave only the bias path") {
  Rng rng(7);
  GraphPolicy pol(small_config(), rng);
  auto z = one_hot_rows(12, 2, 0);
  auto o1 = pol.act(random_tensor(rng, {6, 2}, -1, 1, false), z, rng, true);
  auto o2 = pol.act(random_tensor(rng, {6, 2}, -1, 1, false), z, rng, true);
  CHECK(std::vector<double>(o1.mu.data().begin(), o1.mu.data().end()) ==
        std::vector<double>(o2.mu.data().begin(), o2.mu.data().end()));
  for (std::size_t r = 1; r < 6; ++r) {
    CHECK(o1.mu.data()[2 * r] == o1.mu.data()[0]);
    CHECK(o1.mu.data()[2 * r + 1] == o1.mu.data()[1]);
  }
}

TEST_CASE("sigma floor and action bounds") {
  Rng rng(8);
  GraphPolicy pol(small_config(), rng);
  for (auto& [name, t] : pol.actor_params()) {
    if (name.starts_with("actor.sigma.b")) {
      for (auto& v : t.mutable_data()) v = -500.0;
    }
    if (name.starts_with("actor.mu.b")) {
      for (auto& v : t.mutable_data()) v = 50.0;
    }
  }
  auto z = one_hot_rows(6, 2, 1);
  auto out = pol.act(random_tensor(rng, {3, 2}, -1, 1, false), z, rng);
  for (double s : out.sigma.data()) CHECK(s >= 1e-3);
  for (double a : out.action.data()) CHECK(std::abs(a) <= pol.config().v_max);
}

TEST_CASE("log prob matches an independent squashed-gaussian density") {
  Rng rng(9);
  PolicyConfig cfg = small_config();
  cfg.v_max = 2.0;
  GraphPolicy pol(cfg, rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor(rng, {6, 2}, -1, 1, false);
    InteractionGraphSample dist;
    dist.logits = random_tensor(rng, {12, 2}, -1, 1, false);
    dist.temperature = 0.5;
    auto z = sample_edges(dist, false, rng);
    auto out = pol.act(x, z, rng);
    for (std::size_t r = 0; r < 6; ++r) {
      double lp = 0.0;
      for (std::size_t d = 0; d < 2; ++d) {
        const double a = out.action.data()[2 * r + d] / cfg.v_max;
        const double u = std::atanh(a);
        const double mu = out.mu.data()[2 * r + d];
        const double sg = out.sigma.data()[2 * r + d];
        const double dens = std::exp(-0.5 * (u - mu) * (u - mu) / (sg * sg)) / (sg * std::sqrt(2 * M_PI));
        lp += std::log(dens / (cfg.v_max * (1.0 - a * a)));
      }
      CHECK(std::abs(out.log_prob.data()[r] - lp) < 1e-6);
    }
  }
}

TEST_CASE("critic basics") {
  Rng rng(10);
  auto cfg = small_config();
  CriticNet net(cfg);
  nn::ParameterSet p;
  net.init(p, rng);
  auto x = random_tensor(rng, {6, 2}, -1, 1, false);
  auto a = random_tensor(rng, {6, 2}, -2, 2, false);
  auto z = one_hot_rows(12, 2, 1);
  CHECK(net.q(p, x, z, a).shape() == ad::Shape{2, 1});
  CHECK_THROWS_AS(net.q(p, x, z, ad::Tensor::zeros({6, 3})), Error);
  CHECK_THROWS_AS(net.q(p, x, ad::Tensor::zeros({6, 2}), a), Error);
  fill(p, 0.0);
  auto q = net.q(p, x, z, a);
  for (double v : q.data()) CHECK(v == 0.0);
}

TEST_CASE("critic is differentiable in the action") {
  Rng rng(11);
  auto cfg = small_config();
  CriticNet net(cfg);
  nn::ParameterSet p;
  net.init(p, rng);
  auto x = random_tensor(rng, {6, 2}, -1, 1, false);
  auto a = random_tensor(rng, {6, 2}, -1.5, 1.5);
  auto z = random_tensor(rng, {12, 2}, 0, 1, false);
  auto res = grad_check({a}, [&] { return ad::sum(net.q(p, x, z, a)); }, 1e-6, 1e-3);
  CHECK_MESSAGE(res.ok, res.worst);
}

TEST_CASE("pooled Q is invariant to agent relabeling") {
  Rng rng(12);
  auto cfg = small_config();
  CriticNet net(cfg);
  nn::ParameterSet p;
  net.init(p, rng);
  nn::PairIndex g(3, 1);
  auto x = random_tensor(rng, {3, 2}, -1, 1, false);
  auto a = random_tensor(rng, {3, 2}, -1, 1, false);
  auto z = random_tensor(rng, {6, 2}, 0, 1, false);
  std::vector<std::size_t> perm{2, 0, 1};
  auto q0 = net.q(p, x, z, a).item();
  auto q1 = net.q(p, ad::gather_rows(x, perm), ad::gather_rows(z, edge_perm(g, perm)), ad::gather_rows(a, perm)).item();
  CHECK(q1 == doctest::Approx(q0).epsilon(1e-12));
}

TEST_CASE("full policy pass is permutation equivariant") {
  Rng rng(13);
  GraphPolicy pol(small_config(), rng);
  nn::PairIndex g(3, 1);
  std::vector<std::size_t> perm{1, 2, 0};
  auto eperm = edge_perm(g, perm);
  std::vector<ad::Tensor> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(random_tensor(rng, {3, 2}, -1, 1, false));
  auto s = pol.initial_state(1);
  auto sp = pol.initial_state(1);
  for (const auto& x : xs) {
    auto [n1, d1] = pol.encode_step(s, x);
    auto [n2, d2] = pol.encode_step(sp, ad::gather_rows(x, perm));
    auto pd = ad::gather_rows(d1.probs, eperm);
    for (std::size_t k = 0; k < pd.numel(); ++k) CHECK(d2.probs.data()[k] == doctest::Approx(pd.data()[k]).epsilon(1e-12));
    auto o1 = pol.act(x, d1.probs, rng, true);
    auto o2 = pol.act(ad::gather_rows(x, perm), d2.probs, rng, true);
    auto pm = ad::gather_rows(o1.mu, perm);
    for (std::size_t k = 0; k < pm.numel(); ++k) CHECK(o2.mu.data()[k] == doctest::Approx(pm.data()[k]).epsilon(1e-12));
    s = n1;
    sp = n2;
  }
}

TEST_CASE("policy and critic gradients match finite differences") {
  Rng rng(14);
  auto cfg = small_config();
  cfg.hidden = 4;
  GraphPolicy pol(cfg, rng);
  CriticNet net(cfg);
  nn::ParameterSet qp;
  net.init(qp, rng);
  auto x0 = random_tensor(rng, {6, 2}, -1, 1, false);
  auto x1 = random_tensor(rng, {6, 2}, -1, 1, false);
  auto inputs = tensors_of(pol.encoder_params());
  auto actor = tensors_of(pol.actor_params());
  auto critic = tensors_of(qp);
  inputs.insert(inputs.end(), actor.begin(), actor.end());
  inputs.insert(inputs.end(), critic.begin(), critic.end());
  auto res = grad_check(
      inputs,
      [&] {
        Rng fixed(77);
        auto s = pol.initial_state(2);
        auto [s1, d0] = pol.encode_step(s, x0);
        auto [s2, d1] = pol.encode_step(s1, x1);
        auto z = sample_edges(d1, false, fixed);
        auto out = pol.act(x1, z, fixed);
        return ad::sub(ad::mean(out.log_prob), ad::mean(net.q(qp, x1, z, out.action)));
      },
      1e-6, 1e-3);
  CHECK_MESSAGE(res.ok, res.worst);
}

TEST_CASE("polyak averaging") {
  nn::ParameterSet target;
  nn::ParameterSet online;
  target.add("w", ad::Tensor::vector({0.0, 0.0}));
  online.add("w", ad::Tensor::vector({1.0, 1.0}));
  polyak_update(target, online, 0.995);
  CHECK(target.get("w").data()[0] == doctest::Approx(0.005).epsilon(1e-12));
  auto before = target.get("w").data()[0];
  polyak_update(target, online, 1.0);
  CHECK(target.get("w").data()[0] == before);
  for (int k = 0; k < 3000; ++k) polyak_update(target, online, 0.995);
  CHECK(std::abs(target.get("w").data()[1] - 1.0) < 1e-6);

  nn::ParameterSet other;
  other.add("v", ad::Tensor::vector({1.0, 1.0}));
  CHECK_THROWS_AS(polyak_update(target, other, 0.5), Error);
}

TEST_CASE("critic pair targets start equal and move by the polyak bound") {
  Rng rng(15);
  CriticPair pair(small_config(), 0.9, rng);
  for (auto& [name, t] : pair.online[0]) {
    for (auto& v : t.mutable_data()) v += 1.0;
  }
  auto before = pair.target[0].clone();
  polyak_update(pair);
  for (const auto& [name, t] : pair.target[0]) {
    auto b = before.get(name).data();
    auto o = pair.online[0].get(name).data();
    for (std::size_t k = 0; k < t.numel(); ++k) {
      CHECK(std::abs(t.data()[k] - b[k]) <= (1 - 0.9) * std::abs(o[k] - b[k]) + 1e-12);
    }
  }
}
