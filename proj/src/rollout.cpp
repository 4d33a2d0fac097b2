#include "admpo/rollout.hpp"

#include <algorithm>

#include "admpo/errors.hpp"

namespace admpo {

GaussianPrediction EnsembleDynamics::predict(const std::vector<float>& s,
                                             const std::vector<std::vector<float>>& actions,
                                             Rng& model_rng) const {
  if (actions.size() != 1)
    throw UsageError("ensemble predict: single-step model got k=" + std::to_string(actions.size()));
  return model_->predict(s, actions[0], model_rng);
}

GaussianPrediction OracleDynamics::predict(const std::vector<float>& s,
                                           const std::vector<std::vector<float>>& actions,
                                           Rng&) const {
  if (actions.empty() || static_cast<int64_t>(actions.size()) > m_)
    throw UsageError("oracle predict: k outside [1, m]");
  EnvState st;
  st.s = s;
  float last_reward = 0;
  for (const auto& a : actions) {
    StepResult r = env_->step(st, a);
    last_reward = r.reward;
    st = std::move(r.next);
    st.step = 0;
  }
  GaussianPrediction p;
  p.mean_s = st.s;
  p.std_s.assign(st.s.size(), 0.0f);
  p.mean_r = last_reward;
  p.std_r = 0.0f;
  return p;
}

namespace {

// Conditioning inputs for backtracking length k: the state k steps back and
// the intervening recorded actions plus the fresh action.
std::pair<const std::vector<float>*, std::vector<std::vector<float>>> backtrack_inputs(
    const RolloutStart& window, const std::vector<float>& fresh_action, int64_t m, int64_t k) {
  const std::vector<float>* s = &window.states[static_cast<size_t>(m - k)];
  std::vector<std::vector<float>> actions;
  actions.reserve(static_cast<size_t>(k));
  for (int64_t i = m - k; i <= m - 2; ++i) actions.push_back(window.actions[static_cast<size_t>(i)]);
  actions.push_back(fresh_action);
  return {s, std::move(actions)};
}

}  // namespace

TrajectoryReport adm_roll(const Dynamics& model, const Policy& policy, int64_t horizon,
                          int64_t m, const RolloutStart& seed_window, PredictMode mode,
                          bool with_uncertainty, const TerminalFn& terminal,
                          uint64_t traj_seed) {
  if (horizon < 1) throw UsageError("adm_roll: horizon must be >= 1");
  if (m < 1 || m > model.max_backtrack())
    throw UsageError("adm_roll: m=" + std::to_string(m) + " outside the model's range");
  if (static_cast<int64_t>(seed_window.states.size()) != m ||
      static_cast<int64_t>(seed_window.actions.size()) != m - 1)
    throw UsageError("adm_roll: seed window must hold m states and m-1 actions");

  Rng act_rng = Rng::derive(traj_seed, {streams::kPolicyAction});
  Rng k_rng = Rng::derive(traj_seed, {streams::kBacktrack});
  Rng noise_rng = Rng::derive(traj_seed, {streams::kModelNoise});

  RolloutStart window = seed_window;
  TrajectoryReport report;
  report.truncation = Truncation::kHorizon;

  for (int64_t tau = 0; tau < horizon; ++tau) {
    const std::vector<float> s_cur = window.states.back();
    const std::vector<float> a = policy.act(s_cur, act_rng);
    const int64_t k = k_rng.uniform_int(1, m);

    RolloutStep step;
    step.s = s_cur;
    step.a = a;
    step.k = k;

    GaussianPrediction chosen;
    if (with_uncertainty) {
      step.per_k.reserve(static_cast<size_t>(m));
      for (int64_t kk = 1; kk <= m; ++kk) {
        auto [s_in, a_in] = backtrack_inputs(window, a, m, kk);
        step.per_k.push_back(model.predict(*s_in, a_in, noise_rng));
      }
      chosen = step.per_k[static_cast<size_t>(k - 1)];
    } else {
      auto [s_in, a_in] = backtrack_inputs(window, a, m, k);
      chosen = model.predict(*s_in, a_in, noise_rng);
    }

    if (mode == PredictMode::kSample) {
      step.s_next.resize(chosen.mean_s.size());
      for (size_t j = 0; j < chosen.mean_s.size(); ++j)
        step.s_next[j] = static_cast<float>(
            noise_rng.normal(chosen.mean_s[j], chosen.std_s[j]));
      step.r = static_cast<float>(noise_rng.normal(chosen.mean_r, chosen.std_r));
    } else {
      step.s_next = chosen.mean_s;
      step.r = chosen.mean_r;
    }
    step.done = terminal ? terminal(step.s_next) : false;

    // slide the window by one (state, action); the oldest entry falls out
    if (m > 1) {
      window.states.erase(window.states.begin());
      window.states.push_back(step.s_next);
      window.actions.erase(window.actions.begin());
      window.actions.push_back(a);
    } else {
      window.states[0] = step.s_next;
    }

    const bool done = step.done;
    report.steps.push_back(std::move(step));
    if (done) {
      report.truncation = Truncation::kTerminal;
      break;
    }
  }
  return report;
}

RolloutBatchReport branched_rollout(const Dynamics& model, const Policy& policy,
                                    const ReplayBuffer& real_data, ModelBuffer& model_buffer,
                                    int64_t trajectories, int64_t horizon, int64_t m,
                                    PredictMode mode, bool with_uncertainty,
                                    const TerminalFn& terminal, uint64_t seed,
                                    const std::function<float(const RolloutStep&)>& reward_transform) {
  RolloutBatchReport report;
  if (trajectories == 0) return report;
  Rng start_rng = Rng::derive(seed, {streams::kRolloutStart});
  const auto starts = real_data.sample_rollout_starts(trajectories, m, start_rng);
  for (int64_t i = 0; i < trajectories; ++i) {
    const uint64_t traj_seed = Rng::combine(seed, static_cast<uint64_t>(i));
    auto traj = adm_roll(model, policy, horizon, m, starts[static_cast<size_t>(i)], mode,
                         with_uncertainty, terminal, traj_seed);
    for (const auto& step : traj.steps) {
      Transition t;
      t.s = step.s;
      t.a = step.a;
      t.r = reward_transform ? reward_transform(step) : step.r;
      t.s_next = step.s_next;
      t.done = step.done;
      model_buffer.add(std::move(t));
    }
    report.trajectories.push_back(std::move(traj));
  }
  return report;
}

}  // namespace admpo
