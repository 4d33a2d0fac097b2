#include <algorithm>
#include <cmath>
#include <cstdio>

#include "admpo/errors.hpp"
#include "admpo/sac.hpp"
#include "doctest.h"

using namespace admpo;

TEST_CASE("zero-weight actor gives mean action tanh(bias) = 0") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 3, 2, 1);
  agent.actor_net().visit("", [](const std::string&, Tensor<float>& p) {
    for (auto& v : p.data) v = 0;
  });
  Rng rng = Rng::derive(1, {});
  for (int i = 0; i < 5; ++i) {
    std::vector<float> s = {static_cast<float>(rng.uniform(-5, 5)),
                            static_cast<float>(rng.uniform(-5, 5)),
                            static_cast<float>(rng.uniform(-5, 5))};
    auto a = agent.act(s, SacAgent::ActMode::kMean, rng);
    CHECK(a == std::vector<float>{0.0f, 0.0f});
  }
}

TEST_CASE("mean mode is deterministic across calls") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 2, 1, 11);
  Rng rng = Rng::derive(2, {});
  const std::vector<float> s = {0.3f, -0.2f};
  auto a1 = agent.act(s, SacAgent::ActMode::kMean, rng);
  auto a2 = agent.act(s, SacAgent::ActMode::kMean, rng);
  CHECK(a1 == a2);
}

TEST_CASE("sampled actions are bounded") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 3, 2, 7);
  Rng rng = Rng::derive(2, {});
  for (int i = 0; i < 200; ++i) {
    std::vector<float> s = {static_cast<float>(rng.uniform(-10, 10)),
                            static_cast<float>(rng.uniform(-10, 10)),
                            static_cast<float>(rng.uniform(-10, 10))};
    auto a = agent.act(s, SacAgent::ActMode::kSample, rng);
    for (float v : a) CHECK(std::abs(v) <= 1.0f);
  }
}

TEST_CASE("log-prob integrates to one over the action interval (1-dim)") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 2, 1, 3);
  const std::vector<float> s = {0.4f, -0.9f};
  // numerical quadrature of exp(log pi(a|s)) over a in (-1, 1)
  const int n = 20000;
  double integral = 0;
  for (int i = 0; i < n; ++i) {
    const double a = -1.0 + 2.0 * (i + 0.5) / n;
    integral += std::exp(agent.log_prob(s, {static_cast<float>(a)})) * (2.0 / n);
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sampled log-prob matches the density formula") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 2, 1, 3);
  Rng rng = Rng::derive(4, {});
  const std::vector<float> s = {0.1f, 0.2f};
  for (int i = 0; i < 10; ++i) {
    auto [a, logp] = agent.act_logprob(s, rng);
    CHECK(agent.log_prob(s, a) == doctest::Approx(logp).epsilon(1e-3));
  }
}

namespace {

Transition tr(std::vector<float> s, std::vector<float> a, float r, std::vector<float> sn,
              bool done) {
  Transition t;
  t.s = std::move(s);
  t.a = std::move(a);
  t.r = r;
  t.s_next = std::move(sn);
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("update-graph entropy agrees with the sampling log-prob path") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 2, 1, 21);
  Rng rng = Rng::derive(31, {});
  std::vector<Transition> batch;
  for (int i = 0; i < 64; ++i) {
    Transition t;
    t.s = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))};
    t.a = {static_cast<float>(rng.uniform(-1, 1))};
    t.r = static_cast<float>(rng.uniform(-1, 0));
    t.s_next = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))};
    t.done = false;
    batch.push_back(std::move(t));
  }
  // Monte-Carlo estimate of E[-log pi] on the same states via the raw path
  double mc = 0;
  int64_t n = 0;
  Rng mc_rng = Rng::derive(32, {});
  for (const auto& t : batch)
    for (int rep = 0; rep < 64; ++rep) {
      mc -= agent.act_logprob(t.s, mc_rng).second;
      ++n;
    }
  mc /= static_cast<double>(n);
  Rng up_rng = Rng::derive(33, {});
  auto losses = agent.update(batch, up_rng);
  CHECK(losses.entropy == doctest::Approx(mc).epsilon(0.15));
}

TEST_CASE("terminal transitions bootstrap to exactly r") {
  SacConfig cfg;
  cfg.hidden = 8;
  SacAgent agent(cfg, 2, 1, 5);
  Rng rng = Rng::derive(5, {});
  std::vector<Transition> batch = {tr({0, 0}, {0.5f}, 2.5f, {1, 1}, true),
                                   tr({0, 1}, {0.1f}, -1.0f, {1, 0}, false)};
  auto y = agent.critic_targets(batch, rng);
  CHECK(y[0] == 2.5f);
  CHECK(y[1] != -1.0f);  // non-terminal bootstraps
}

TEST_CASE("gamma = 0 regresses to the immediate reward") {
  SacConfig cfg;
  cfg.hidden = 8;
  cfg.gamma = 1e-9;  // gamma must be in (0,1); effectively zero
  SacAgent agent(cfg, 2, 1, 5);
  Rng rng = Rng::derive(6, {});
  std::vector<Transition> batch = {tr({0, 0}, {0.5f}, 2.5f, {1, 1}, false)};
  auto y = agent.critic_targets(batch, rng);
  CHECK(y[0] == doctest::Approx(2.5f).epsilon(1e-6));
}

TEST_CASE("targets move only via the Polyak rule") {
  SacConfig cfg;
  cfg.hidden = 8;
  cfg.tau = 0.25;
  SacAgent agent(cfg, 2, 1, 9);
  Rng rng = Rng::derive(9, {});
  std::vector<Transition> batch = {tr({0, 0}, {0.5f}, 1.0f, {1, 1}, false),
                                   tr({1, 0}, {-0.5f}, 0.0f, {0, 1}, false)};
  for (int i = 0; i < 3; ++i) agent.update(batch, rng);
  CHECK(agent.target_distance() > 0);

  // snapshot, update once, and verify target' = (1-tau)*target + tau*online'
  std::vector<float> t_before;
  for (const auto& l : agent.critic1_target().layers) {
    t_before.insert(t_before.end(), l.weight.data.begin(), l.weight.data.end());
    t_before.insert(t_before.end(), l.bias.data.begin(), l.bias.data.end());
  }
  agent.update(batch, rng);
  std::vector<float> online_after, t_after;
  for (const auto& l : agent.critic1().layers) {
    online_after.insert(online_after.end(), l.weight.data.begin(), l.weight.data.end());
    online_after.insert(online_after.end(), l.bias.data.begin(), l.bias.data.end());
  }
  for (const auto& l : agent.critic1_target().layers) {
    t_after.insert(t_after.end(), l.weight.data.begin(), l.weight.data.end());
    t_after.insert(t_after.end(), l.bias.data.begin(), l.bias.data.end());
  }
  const float tau = 0.25f;
  for (size_t i = 0; i < t_before.size(); ++i)
    CHECK(t_after[i] == doctest::Approx((1 - tau) * t_before[i] + tau * online_after[i]).epsilon(1e-6));
}

TEST_CASE("learned Q matches a value-iteration oracle on a two-state bandit") {
  // deterministic MDP: states s0 <-> s1 flip every step; never terminal
  // r(s0, a) = 1 - (a - 0.5)^2, r(s1, a) = -(a + 0.5)^2
  const double gamma = 0.9;
  auto reward = [](int s, double a) {
    return s == 0 ? 1.0 - (a - 0.5) * (a - 0.5) : -(a + 0.5) * (a + 0.5);
  };

  // value-iteration oracle on a dense action grid
  const int grid = 801;
  double v[2] = {0, 0};
  for (int iter = 0; iter < 400; ++iter) {
    double nv[2];
    for (int s = 0; s < 2; ++s) {
      double best = -1e18;
      for (int gi = 0; gi < grid; ++gi) {
        const double a = -1.0 + 2.0 * gi / (grid - 1);
        best = std::max(best, reward(s, a) + gamma * v[1 - s]);
      }
      nv[s] = best;
    }
    v[0] = nv[0];
    v[1] = nv[1];
  }
  // closed form cross-check: Q*(s0,a*) = 1/(1-g^2), Q*(s1,a*) = g/(1-g^2)
  const double q0_star = reward(0, 0.5) + gamma * v[1];
  const double q1_star = reward(1, -0.5) + gamma * v[0];
  CHECK(q0_star == doctest::Approx(1.0 / (1 - gamma * gamma)).epsilon(1e-6));
  CHECK(q1_star == doctest::Approx(gamma / (1 - gamma * gamma)).epsilon(1e-6));

  // offline transitions covering the action range
  std::vector<Transition> data;
  Rng gen = Rng::derive(77, {});
  for (int i = 0; i < 4000; ++i) {
    const int s = i % 2;
    const double a = gen.uniform(-1, 1);
    const float r = static_cast<float>(reward(s, a));
    std::vector<float> sv = s == 0 ? std::vector<float>{1, 0} : std::vector<float>{0, 1};
    std::vector<float> sn = s == 0 ? std::vector<float>{0, 1} : std::vector<float>{1, 0};
    data.push_back(tr(sv, {static_cast<float>(a)}, r, sn, false));
  }

  SacConfig cfg;
  cfg.hidden = 32;
  cfg.gamma = gamma;
  cfg.lr_actor = 3e-4;
  cfg.lr_critic = 3e-4;
  cfg.batch = 64;
  cfg.auto_alpha = false;
  cfg.init_alpha = 0;  // pure value maximization so Q converges to Q*
  SacAgent agent(cfg, 2, 1, 1234);

  Rng rng = Rng::derive(1234, {streams::kBatch});
  std::vector<Transition> batch(static_cast<size_t>(cfg.batch));
  for (int step = 0; step < 20000; ++step) {
    for (auto& b : batch)
      b = data[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(data.size()) - 1))];
    agent.update(batch, rng);
  }

  const double q0 = agent.min_q({1, 0}, {0.5f});
  const double q1 = agent.min_q({0, 1}, {-0.5f});
  CHECK(std::abs(q0 - q0_star) < 1e-2);
  CHECK(std::abs(q1 - q1_star) < 1e-2);
}

TEST_CASE("save/load round trip preserves the policy") {
  SacConfig cfg;
  cfg.hidden = 16;
  SacAgent agent(cfg, 3, 1, 42);
  agent.save("test_sac_rt");
  SacAgent loaded = SacAgent::load("test_sac_rt");
  Rng r1 = Rng::derive(1, {}), r2 = Rng::derive(1, {});
  const std::vector<float> s = {0.1f, -0.3f, 0.8f};
  CHECK(agent.act(s, SacAgent::ActMode::kMean, r1) == loaded.act(s, SacAgent::ActMode::kMean, r2));
  std::remove("test_sac_rt.admp");
  std::remove("test_sac_rt.json");
}

TEST_CASE("behavior policy specs") {
  auto spec = EnvSpec{"pendulum", 3, 1, 200, false, ""};
  auto rp = make_behavior_policy("random", spec);
  Rng rng = Rng::derive(3, {});
  auto a = rp->act({0, 0, 0}, rng);
  CHECK(a.size() == 1);
  CHECK_THROWS_AS(make_behavior_policy("bogus:x", spec), ConfigError);

  SacConfig cfg;
  cfg.hidden = 8;
  SacAgent agent(cfg, 3, 1, 7);
  agent.save("test_sac_bp");
  auto cp = make_behavior_policy("sac:test_sac_bp:0.1", spec);
  auto am = cp->act({0.5f, 0.5f, 0.0f}, rng);
  CHECK(am.size() == 1);
  CHECK(std::abs(am[0]) <= 1.0f);
  auto mp = make_behavior_policy("mix:test_sac_bp:0.1:0.5", spec);
  CHECK(mp->act({0.5f, 0.5f, 0.0f}, rng).size() == 1);

  // dim mismatch rejected
  auto spec_pm = EnvSpec{"pointmass", 4, 2, 100, true, ""};
  CHECK_THROWS_AS(make_behavior_policy("sac:test_sac_bp:0.1", spec_pm), ConfigError);
  std::remove("test_sac_bp.admp");
  std::remove("test_sac_bp.json");
}

TEST_CASE("config validation names the offending field") {
  SacConfig cfg;
  cfg.tau = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tau") != std::string::npos);
  }
}
