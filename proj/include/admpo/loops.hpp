#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "admpo/data.hpp"
#include "admpo/env.hpp"
#include "admpo/model.hpp"
#include "admpo/sac.hpp"

namespace admpo {

// Thresholded linear roll-out length schedule:
//   f(t) = min(max(x + (t - a)/(b - a) * (y - x), x), y), floored to an
// integer >= 1.
struct ScheduleFn {
  double x = 1;
  double y = 1;
  int64_t a = 0;
  int64_t b = 1;

  void validate() const;
  int64_t operator()(int64_t t) const;
};

struct OnlineLoopConfig {
  int64_t warmup = 1000;                // U: uniform-random env steps
  int64_t epochs = 14;                  // N
  int64_t steps_per_epoch = 1000;       // E
  int64_t retrain_interval = 250;       // env steps between model refits; 0 = epoch start only
  int64_t rollouts_per_step = 2;        // M (0 disables the model path entirely)
  int64_t utd = 20;                     // G: policy updates per env step
  ScheduleFn h_schedule;
  int64_t eval_interval = 1000;         // env steps; 0 disables evaluation
  int64_t eval_episodes = 10;
  size_t model_buffer_capacity = 100000;
  size_t env_buffer_capacity = 1000000;

  void validate() const;
};

struct OfflineLoopConfig {
  int64_t iterations = 60;        // N
  int64_t rollouts_per_iter = 50; // M
  int64_t horizon = 5;            // H
  double beta = 1.0;              // uncertainty penalty coefficient
  int64_t updates_per_iter = 150; // G
  int64_t eval_interval = 15;     // iterations; 0 = final evaluation only
  int64_t eval_episodes = 10;
  size_t model_buffer_capacity = 100000;

  void validate() const;
};

struct EvalStats {
  double mean_return = 0;
  double std_return = 0;
};

EvalStats evaluate_policy(const Env& env, const SacAgent& agent, int64_t episodes,
                          uint64_t seed);

struct RunResult {
  std::unique_ptr<SacAgent> agent;
  std::unique_ptr<AdmModel> model;
  std::vector<nlohmann::ordered_json> metrics;  // one record per evaluation
  size_t env_transitions = 0;                   // final D_env size (online)
  std::unique_ptr<ModelBuffer> model_buffer;    // final D_model contents
};

// ADMPO-ON: interleaved model refits, branched roll-outs with random
// backtracking, and mixed-batch policy updates. With rollouts_per_step = 0
// and real_fraction = 1 the loop degenerates to model-free SAC (the repo's
// online baseline). No uncertainty penalty is ever applied online.
RunResult run_online(const Env& env, const AdmConfig& model_cfg, const SacConfig& sac_cfg,
                     const OnlineLoopConfig& loop_cfg, uint64_t seed,
                     const std::string& out_dir = "");

// ADMPO-OFF: one model fit on the dataset, then iterations of penalized
// roll-outs (r - beta * u, applied exactly once per generated transition)
// and mixed-batch policy updates, with a final real-environment evaluation.
RunResult run_offline(const Env& env, const ReplayBuffer& dataset, const AdmConfig& model_cfg,
                      const SacConfig& sac_cfg, const OfflineLoopConfig& loop_cfg, uint64_t seed,
                      const std::string& out_dir = "");

void write_metrics(const std::string& path, const std::vector<nlohmann::ordered_json>& metrics);

}  // namespace admpo
