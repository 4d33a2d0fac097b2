#include "admpo/env.hpp"

#include <algorithm>
#include <cmath>

#include "admpo/errors.hpp"

namespace admpo {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Validates and clamps one action component to [-1, 1].
double clamp_action(float a, bool* clamped) {
  if (!std::isfinite(a)) throw UsageError("env: non-finite action component");
  if (a < -1.0f || a > 1.0f) *clamped = true;
  return clampd(static_cast<double>(a), -1.0, 1.0);
}

// Swing-up pendulum. State is the observation (cos th, sin th, thdot).
// Physical constants are frozen for format version 1: g = 10, m = 1, l = 1,
// dt = 0.05, torque = 2 * action, |thdot| <= 8. Reward is
// -(wrap(th)^2 + 0.1*thdot^2 + 0.001*torque^2) with wrap into [-pi, pi],
// so the maximum is at the upright unstable equilibrium.
class PendulumEnv final : public Env {
 public:
  PendulumEnv() {
    spec_.name = "pendulum";
    spec_.state_dim = 3;
    spec_.action_dim = 1;
    spec_.max_episode_steps = 200;
    spec_.has_termination = false;
    spec_.reward_desc = "-(wrap(theta)^2 + 0.1*thdot^2 + 0.001*torque^2)";
  }

  const EnvSpec& spec() const override { return spec_; }
  int64_t reset_noise_dim() const override { return 2; }

  EnvState init_from_noise(const std::vector<double>& noise) const override {
    if (noise.size() != 2) throw UsageError("pendulum: reset noise must have 2 components");
    const double th = kPi + noise[0] * kPi;  // centered hanging down
    const double thdot = noise[1];
    EnvState st;
    st.s = {static_cast<float>(std::cos(th)), static_cast<float>(std::sin(th)),
            static_cast<float>(thdot)};
    st.step = 0;
    return st;
  }

  StepResult step(const EnvState& state, const std::vector<float>& action) const override {
    if (action.size() != 1) throw UsageError("pendulum: expected 1 action component");
    StepResult out;
    const double u = 2.0 * clamp_action(action[0], &out.action_clamped);
    const double th = std::atan2(static_cast<double>(state.s[1]), static_cast<double>(state.s[0]));
    const double thdot = static_cast<double>(state.s[2]);

    const double cost = th * th + 0.1 * thdot * thdot + 0.001 * u * u;
    const double new_thdot = clampd(thdot + (3.0 * 10.0 / 2.0 * std::sin(th) + 3.0 * u) * 0.05,
                                    -8.0, 8.0);
    const double new_th = th + new_thdot * 0.05;

    out.next.s = {static_cast<float>(std::cos(new_th)), static_cast<float>(std::sin(new_th)),
                  static_cast<float>(new_thdot)};
    out.next.step = state.step + 1;
    out.reward = static_cast<float>(-cost);
    out.done = out.next.step >= spec_.max_episode_steps;
    return out;
  }

  bool terminal(const std::vector<float>&) const override { return false; }

 private:
  EnvSpec spec_;
};

// 2-d double integrator. State (x, y, vx, vy); action is acceleration in
// [-1, 1]^2; dt = 0.1; |v| <= 2 per axis, |pos| <= 5 per axis. The episode
// terminates inside a goal disc of radius 0.3 around (1.5, 1.5).
class PointMassEnv final : public Env {
 public:
  PointMassEnv() {
    spec_.name = "pointmass";
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.max_episode_steps = 100;
    spec_.has_termination = true;
    spec_.reward_desc = "-dist(pos, goal) - 0.05*|a|^2, +10 on entering the goal disc";
  }

  const EnvSpec& spec() const override { return spec_; }
  int64_t reset_noise_dim() const override { return 4; }

  EnvState init_from_noise(const std::vector<double>& noise) const override {
    if (noise.size() != 4) throw UsageError("pointmass: reset noise must have 4 components");
    EnvState st;
    st.s = {static_cast<float>(noise[0] * 0.2), static_cast<float>(noise[1] * 0.2),
            static_cast<float>(noise[2] * 0.05), static_cast<float>(noise[3] * 0.05)};
    st.step = 0;
    return st;
  }

  StepResult step(const EnvState& state, const std::vector<float>& action) const override {
    if (action.size() != 2) throw UsageError("pointmass: expected 2 action components");
    StepResult out;
    const double ax = clamp_action(action[0], &out.action_clamped);
    const double ay = clamp_action(action[1], &out.action_clamped);
    const double x = state.s[0], y = state.s[1], vx = state.s[2], vy = state.s[3];

    const double dt = 0.1;
    double nx = x + vx * dt + 0.5 * ax * dt * dt;
    double ny = y + vy * dt + 0.5 * ay * dt * dt;
    double nvx = clampd(vx + ax * dt, -2.0, 2.0);
    double nvy = clampd(vy + ay * dt, -2.0, 2.0);
    nx = clampd(nx, -5.0, 5.0);
    ny = clampd(ny, -5.0, 5.0);

    out.next.s = {static_cast<float>(nx), static_cast<float>(ny), static_cast<float>(nvx),
                  static_cast<float>(nvy)};
    out.next.step = state.step + 1;

    const double dist = std::hypot(nx - kGoalX, ny - kGoalY);
    double reward = -dist - 0.05 * (ax * ax + ay * ay);
    const bool reached = terminal(out.next.s);
    if (reached) reward += 10.0;
    out.reward = static_cast<float>(reward);
    out.done = reached || out.next.step >= spec_.max_episode_steps;
    return out;
  }

  bool terminal(const std::vector<float>& s) const override {
    return std::hypot(static_cast<double>(s[0]) - kGoalX, static_cast<double>(s[1]) - kGoalY) <
           kGoalRadius;
  }

 private:
  static constexpr double kGoalX = 1.5;
  static constexpr double kGoalY = 1.5;
  static constexpr double kGoalRadius = 0.3;
  EnvSpec spec_;
};

}  // namespace

EnvState Env::reset(Rng& rng) const {
  std::vector<double> noise(static_cast<size_t>(reset_noise_dim()));
  for (auto& n : noise) n = rng.uniform(-1.0, 1.0);
  return init_from_noise(noise);
}

std::vector<float> Env::true_k_step(const std::vector<float>& s,
                                    const std::vector<std::vector<float>>& actions) const {
  if (actions.empty()) throw UsageError("true_k_step: need at least one action (k >= 1)");
  EnvState st;
  st.s = s;
  st.step = 0;
  for (const auto& a : actions) {
    StepResult r = step(st, a);
    st = std::move(r.next);
    st.step = 0;  // pure dynamics composition, no step-limit interaction
  }
  return st.s;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name == "pointmass") return std::make_unique<PointMassEnv>();
  throw ConfigError("env: unknown environment '" + name + "' (expected pendulum or pointmass)");
}

std::vector<float> add_obs_noise(const std::vector<float>& s, double std, Rng& rng) {
  std::vector<float> out = s;
  for (auto& v : out) v = static_cast<float>(static_cast<double>(v) + rng.normal(0.0, std));
  return out;
}

}  // namespace admpo
