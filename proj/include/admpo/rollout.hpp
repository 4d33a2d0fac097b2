#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "admpo/data.hpp"
#include "admpo/env.hpp"
#include "admpo/model.hpp"
#include "admpo/policy.hpp"
#include "admpo/rng.hpp"

namespace admpo {

// k-step conditional predictor driving roll-outs. model_rng is consumed only
// by stochastic predictors (the ensemble's member pick); the adm ignores it.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  virtual GaussianPrediction predict(const std::vector<float>& s,
                                     const std::vector<std::vector<float>>& actions,
                                     Rng& model_rng) const = 0;
  virtual int64_t max_backtrack() const = 0;
};

class AdmDynamics final : public Dynamics {
 public:
  explicit AdmDynamics(const AdmModel& model) : model_(&model) {}
  GaussianPrediction predict(const std::vector<float>& s,
                             const std::vector<std::vector<float>>& actions,
                             Rng&) const override {
    return model_->predict(s, actions);
  }
  int64_t max_backtrack() const override { return model_->m(); }

 private:
  const AdmModel* model_;
};

class EnsembleDynamics final : public Dynamics {
 public:
  explicit EnsembleDynamics(const EnsembleModel& model) : model_(&model) {}
  GaussianPrediction predict(const std::vector<float>& s,
                             const std::vector<std::vector<float>>& actions,
                             Rng& model_rng) const override;
  int64_t max_backtrack() const override { return 1; }

 private:
  const EnsembleModel* model_;
};

// True dynamics wrapped as a perfect zero-variance predictor.
class OracleDynamics final : public Dynamics {
 public:
  OracleDynamics(const Env& env, int64_t m) : env_(&env), m_(m) {}
  GaussianPrediction predict(const std::vector<float>& s,
                             const std::vector<std::vector<float>>& actions,
                             Rng&) const override;
  int64_t max_backtrack() const override { return m_; }

 private:
  const Env* env_;
  int64_t m_;
};

enum class PredictMode { kSample, kMean };
enum class Truncation { kHorizon, kTerminal };

struct RolloutStep {
  std::vector<float> s;
  std::vector<float> a;
  float r = 0;
  std::vector<float> s_next;
  bool done = false;
  int64_t k = 0;                            // chosen backtracking length
  std::vector<GaussianPrediction> per_k;    // all-k predictions when requested
};

struct TrajectoryReport {
  std::vector<RolloutStep> steps;
  Truncation truncation = Truncation::kHorizon;
};

struct RolloutBatchReport {
  std::vector<TrajectoryReport> trajectories;
  int64_t total_steps() const {
    int64_t n = 0;
    for (const auto& t : trajectories) n += static_cast<int64_t>(t.steps.size());
    return n;
  }
};

using TerminalFn = std::function<bool(const std::vector<float>&)>;

// H-step roll-out with per-step uniformly random backtracking over a sliding
// m-step window. The seed window must hold m real states and m-1 actions;
// the current step's action is always drawn fresh from the policy.
//
// Streams: the trajectory seed spawns one sub-stream per role
// (policy actions, backtracking draws, model/prediction noise), so an
// independent re-implementation can replay the exact choices.
TrajectoryReport adm_roll(const Dynamics& model, const Policy& policy, int64_t horizon,
                          int64_t m, const RolloutStart& seed_window, PredictMode mode,
                          bool with_uncertainty, const TerminalFn& terminal,
                          uint64_t traj_seed);

// M independent trajectories seeded from real data; generated transitions are
// appended single-step to the model buffer. reward_transform, when given,
// maps each step to the stored reward (offline penalty hook) and is applied
// exactly once per transition.
RolloutBatchReport branched_rollout(const Dynamics& model, const Policy& policy,
                                    const ReplayBuffer& real_data, ModelBuffer& model_buffer,
                                    int64_t trajectories, int64_t horizon, int64_t m,
                                    PredictMode mode, bool with_uncertainty,
                                    const TerminalFn& terminal, uint64_t seed,
                                    const std::function<float(const RolloutStep&)>& reward_transform = {});

}  // namespace admpo
