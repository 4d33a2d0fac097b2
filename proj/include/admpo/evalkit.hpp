#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admpo/env.hpp"
#include "admpo/loops.hpp"
#include "admpo/model.hpp"
#include "admpo/sac.hpp"

namespace admpo {

// Open-loop error growth: roll each model out in mean mode over recorded
// action sequences and measure the L2 distance to the recorded states in
// normalized state space. Non-finite predictions clamp the error to the
// float32 maximum for the rest of that trajectory.
struct CompoundingErrorCurve {
  std::string model_id;
  std::vector<int64_t> lengths;      // 1..L
  std::vector<double> mean_error;
  std::vector<double> std_error;
  int64_t starts = 0;
};

CompoundingErrorCurve compounding_error_adm(const AdmModel& model, const ReplayBuffer& data,
                                            int64_t max_len, int64_t starts, uint64_t seed);
CompoundingErrorCurve compounding_error_bootstrap(const BootstrapRnnModel& model,
                                                  const ReplayBuffer& data, int64_t max_len,
                                                  int64_t starts, uint64_t seed);
CompoundingErrorCurve compounding_error_ensemble(const EnsembleModel& model,
                                                 const ReplayBuffer& data, int64_t max_len,
                                                 int64_t starts, uint64_t seed,
                                                 int64_t align_m = 1);
// True dynamics wrapped as the predictor; the curve is exactly zero.
CompoundingErrorCurve compounding_error_oracle(const Env& env, const ReplayBuffer& data,
                                               int64_t max_len, int64_t starts, uint64_t seed,
                                               int64_t m);

// Uncertainty-vs-error scatter over roll-outs driven by three policies.
struct ScatterPoint {
  double u = 0;
  double err = 0;  // one-step model error in normalized state space
  std::string policy;
};

struct UncertaintyScatter {
  std::vector<ScatterPoint> points;
  double pearson_r = 0;
  bool degenerate = false;  // zero variance in u or err
  double mean_u_random = 0, mean_u_learned = 0, mean_u_behavior = 0;
};

UncertaintyScatter uncertainty_scatter(const AdmModel& model, const ReplayBuffer& data,
                                       const Env& env, const SacAgent& agent,
                                       int64_t points_per_policy, int64_t horizon,
                                       uint64_t seed);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys, bool* degenerate);

// Offline-run sweep over maximum backtracking lengths.
struct SweepRow {
  int64_t m = 0;
  double mean_return = 0;
  double std_return = 0;
};

std::vector<SweepRow> m_sweep(const Env& env, const ReplayBuffer& dataset,
                              const AdmConfig& model_cfg, const SacConfig& sac_cfg,
                              const OfflineLoopConfig& loop_cfg,
                              const std::vector<int64_t>& m_values,
                              const std::vector<uint64_t>& seeds);

void write_curve_csv(const std::string& path, const CompoundingErrorCurve& curve);
void write_scatter_csv(const std::string& path, const UncertaintyScatter& scatter);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace admpo
