#include "admpo/loops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "admpo/errors.hpp"
#include "admpo/rollout.hpp"
#include "admpo/uncertainty.hpp"
#include "admpo/util.hpp"

namespace admpo {

void ScheduleFn::validate() const {
  if (a >= b) throw ConfigError("schedule: requires a < b");
  if (x > y) throw ConfigError("schedule: requires x <= y");
}

int64_t ScheduleFn::operator()(int64_t t) const {
  const double f = x + static_cast<double>(t - a) / static_cast<double>(b - a) * (y - x);
  const double clamped = std::min(std::max(f, x), y);
  return std::max<int64_t>(1, static_cast<int64_t>(std::floor(clamped)));
}

void OnlineLoopConfig::validate() const {
  if (warmup < 1) throw ConfigError("online.warmup must be >= 1");
  if (epochs < 1) throw ConfigError("online.epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("online.steps_per_epoch must be >= 1");
  if (utd < 1) throw ConfigError("online.utd must be >= 1");
  if (rollouts_per_step < 0) throw ConfigError("online.rollouts_per_step must be >= 0");
  if (rollouts_per_step > 0) h_schedule.validate();
}

void OfflineLoopConfig::validate() const {
  if (iterations < 1) throw ConfigError("offline.iterations must be >= 1");
  if (horizon < 1) throw ConfigError("offline.horizon must be >= 1");
  if (beta < 0) throw ConfigError("offline.beta must be >= 0");
  if (updates_per_iter < 1) throw ConfigError("offline.updates_per_iter must be >= 1");
  if (rollouts_per_iter < 1) throw ConfigError("offline.rollouts_per_iter must be >= 1");
}

EvalStats evaluate_policy(const Env& env, const SacAgent& agent, int64_t episodes,
                          uint64_t seed) {
  std::vector<double> returns;
  for (int64_t e = 0; e < episodes; ++e) {
    Rng reset_rng = Rng::derive(seed, {streams::kEval, static_cast<uint64_t>(e), streams::kEnvReset});
    Rng act_rng = Rng::derive(seed, {streams::kEval, static_cast<uint64_t>(e), streams::kPolicyAction});
    EnvState st = env.reset(reset_rng);
    double ep_return = 0;
    while (true) {
      const auto a = agent.act(st.s, SacAgent::ActMode::kMean, act_rng);
      StepResult r = env.step(st, a);
      ep_return += r.reward;
      st = std::move(r.next);
      if (r.done) break;
    }
    returns.push_back(ep_return);
  }
  EvalStats stats;
  for (double r : returns) stats.mean_return += r;
  stats.mean_return /= static_cast<double>(returns.size());
  for (double r : returns)
    stats.std_return += (r - stats.mean_return) * (r - stats.mean_return);
  stats.std_return = std::sqrt(stats.std_return / static_cast<double>(returns.size()));
  return stats;
}

namespace {

// Persistent environment cursor: owns the live episode across loop phases.
class EnvCursor {
 public:
  EnvCursor(const Env& env, ReplayBuffer& buffer, uint64_t seed)
      : env_(env), buffer_(buffer), seed_(seed) {
    reset();
  }

  const std::vector<float>& state() const { return state_.s; }

  // One environment step; stores the transition and handles episode ends.
  void step(const std::vector<float>& action) {
    StepResult r = env_.step(state_, action);
    buffer_.add(state_.s, action, r.reward, r.next.s, env_.terminal(r.next.s));
    state_ = std::move(r.next);
    if (r.done) {
      buffer_.end_episode();
      reset();
    }
  }

 private:
  void reset() {
    Rng rng = Rng::derive(seed_, {streams::kEnvReset, episodes_++});
    state_ = env_.reset(rng);
  }

  const Env& env_;
  ReplayBuffer& buffer_;
  uint64_t seed_;
  uint64_t episodes_ = 0;
  EnvState state_;
};

std::vector<Transition> mixed_batch(const ReplayBuffer& real, const ModelBuffer& model,
                                    int64_t batch, double real_fraction, Rng& rng) {
  std::vector<Transition> out;
  out.reserve(static_cast<size_t>(batch));
  int64_t n_real = batch;
  if (model.size() > 0 && real_fraction < 1.0) {
    n_real = std::max<int64_t>(1, static_cast<int64_t>(std::llround(
                                      real_fraction * static_cast<double>(batch))));
  }
  const int64_t n_model = batch - n_real;
  for (size_t idx : real.sample_indices(n_real, rng)) out.push_back(real.transition(idx));
  if (n_model > 0)
    for (size_t idx : model.sample_indices(n_model, rng)) out.push_back(model.at(idx));
  return out;
}

nlohmann::ordered_json eval_record(const Env& env, const SacAgent& agent, int64_t episodes,
                                   uint64_t eval_seed) {
  const EvalStats stats = evaluate_policy(env, agent, episodes, eval_seed);
  if (!std::isfinite(stats.mean_return))
    throw TrainingError("evaluation produced a non-finite return; diagnostic: alpha=" +
                        std::to_string(agent.alpha()));
  nlohmann::ordered_json rec;
  rec["mean_return"] = stats.mean_return;
  rec["std_return"] = stats.std_return;
  return rec;
}

void save_artifacts(const std::string& out_dir, const RunResult& result, bool save_model) {
  if (out_dir.empty()) return;
  write_metrics(out_dir + "/metrics.jsonl", result.metrics);
  result.agent->save(out_dir + "/agent");
  if (save_model) result.model->save(out_dir + "/model");
}

}  // namespace

void write_metrics(const std::string& path, const std::vector<nlohmann::ordered_json>& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("metrics: cannot open '" + path + "'");
  for (const auto& rec : metrics) out << rec.dump() << "\n";
}

RunResult run_online(const Env& env, const AdmConfig& model_cfg, const SacConfig& sac_cfg,
                     const OnlineLoopConfig& loop_cfg, uint64_t seed,
                     const std::string& out_dir) {
  model_cfg.validate();
  sac_cfg.validate();
  loop_cfg.validate();
  const auto& spec = env.spec();

  RunResult result;
  result.model = std::make_unique<AdmModel>(model_cfg, spec.state_dim, spec.action_dim,
                                            Rng::combine(seed, 1));
  result.agent = std::make_unique<SacAgent>(sac_cfg, spec.state_dim, spec.action_dim,
                                            Rng::combine(seed, 2));
  ReplayBuffer d_env(spec.state_dim, spec.action_dim, loop_cfg.env_buffer_capacity);
  result.model_buffer = std::make_unique<ModelBuffer>(loop_cfg.model_buffer_capacity);
  ModelBuffer& d_model = *result.model_buffer;

  // warm-up with uniform-random actions
  EnvCursor cursor(env, d_env, Rng::combine(seed, 3));
  RandomPolicy warmup_policy(spec.action_dim);
  Rng warmup_rng = Rng::derive(seed, {streams::kWarmup});
  for (int64_t i = 0; i < loop_cfg.warmup; ++i)
    cursor.step(warmup_policy.act(cursor.state(), warmup_rng));

  const bool use_model = loop_cfg.rollouts_per_step > 0;
  Rng act_rng = Rng::derive(seed, {streams::kPolicyAction});
  Rng batch_rng = Rng::derive(seed, {streams::kBatch});
  AgentPolicy rollout_policy(
      std::shared_ptr<const SacAgent>(result.agent.get(), [](const SacAgent*) {}),
      SacAgent::ActMode::kSample);
  TerminalFn terminal = [&env](const std::vector<float>& s) { return env.terminal(s); };

  TrainReport last_report;
  int64_t env_steps = loop_cfg.warmup;
  uint64_t retrain_count = 0;

  for (int64_t epoch = 0; epoch < loop_cfg.epochs; ++epoch) {
    for (int64_t e = 0; e < loop_cfg.steps_per_epoch; ++e) {
      // model refit at the interval (or once per epoch when interval is 0)
      const bool refit = use_model && (loop_cfg.retrain_interval > 0
                                           ? env_steps % loop_cfg.retrain_interval == 0
                                           : e == 0);
      if (refit) {
        last_report = result.model->train(d_env, Rng::combine(seed, 1000 + retrain_count));
        ++retrain_count;
        log_debug("online: refit %llu at step %lld, holdout nll %.4f",
                  (unsigned long long)retrain_count, (long long)env_steps,
                  last_report.best_holdout_nll);
      }

      cursor.step(result.agent->act(cursor.state(), SacAgent::ActMode::kSample, act_rng));
      ++env_steps;

      const int64_t horizon = loop_cfg.h_schedule(env_steps);
      if (use_model) {
        AdmDynamics dyn(*result.model);
        branched_rollout(dyn, rollout_policy, d_env, d_model, loop_cfg.rollouts_per_step,
                         horizon, model_cfg.m, PredictMode::kSample, false, terminal,
                         Rng::combine(seed, 5000 + static_cast<uint64_t>(env_steps)));
      }

      for (int64_t g = 0; g < loop_cfg.utd; ++g) {
        auto batch = mixed_batch(d_env, d_model, sac_cfg.batch,
                                 use_model ? sac_cfg.real_fraction : 1.0, batch_rng);
        result.agent->update(batch, batch_rng);
      }

      if (loop_cfg.eval_interval > 0 && env_steps % loop_cfg.eval_interval == 0) {
        auto rec = eval_record(env, *result.agent, loop_cfg.eval_episodes,
                               Rng::combine(seed, 7000 + static_cast<uint64_t>(env_steps)));
        nlohmann::ordered_json full;
        full["env_step"] = env_steps;
        full["mean_return"] = rec["mean_return"];
        full["std_return"] = rec["std_return"];
        full["holdout_nll_per_k"] = last_report.holdout_nll_per_k;
        full["h"] = horizon;
        result.metrics.push_back(std::move(full));
        log_info("online step %lld: return %.1f", (long long)env_steps,
                 rec["mean_return"].get<double>());
      }
    }
  }

  result.env_transitions = d_env.size();
  save_artifacts(out_dir, result, use_model);
  return result;
}

RunResult run_offline(const Env& env, const ReplayBuffer& dataset, const AdmConfig& model_cfg,
                      const SacConfig& sac_cfg, const OfflineLoopConfig& loop_cfg, uint64_t seed,
                      const std::string& out_dir) {
  model_cfg.validate();
  sac_cfg.validate();
  loop_cfg.validate();
  const auto& spec = env.spec();

  RunResult result;
  result.model = std::make_unique<AdmModel>(model_cfg, spec.state_dim, spec.action_dim,
                                            Rng::combine(seed, 1));
  result.agent = std::make_unique<SacAgent>(sac_cfg, spec.state_dim, spec.action_dim,
                                            Rng::combine(seed, 2));
  result.model_buffer = std::make_unique<ModelBuffer>(loop_cfg.model_buffer_capacity);
  ModelBuffer& d_model = *result.model_buffer;

  // single model fit up front
  auto report = result.model->train(dataset, Rng::combine(seed, 3));
  log_info("offline: model holdout nll %.4f after %lld epochs", report.best_holdout_nll,
           (long long)report.epochs);

  Rng batch_rng = Rng::derive(seed, {streams::kBatch});
  AgentPolicy rollout_policy(
      std::shared_ptr<const SacAgent>(result.agent.get(), [](const SacAgent*) {}),
      SacAgent::ActMode::kSample);
  TerminalFn terminal = [&env](const std::vector<float>& s) { return env.terminal(s); };
  const PenaltyConfig penalty{loop_cfg.beta};
  penalty.validate();
  const Normalizer& norm = result.model->normalizer();
  const int64_t m = model_cfg.m;

  for (int64_t iter = 0; iter < loop_cfg.iterations; ++iter) {
    double u_sum = 0;
    int64_t u_count = 0;
    auto penalized = [&](const RolloutStep& step) {
      const auto reading = adm_uncertainty(step.per_k, norm, m);
      u_sum += reading.u;
      ++u_count;
      return penalize(step.r, reading, penalty);
    };
    AdmDynamics dyn(*result.model);
    branched_rollout(dyn, rollout_policy, dataset, d_model, loop_cfg.rollouts_per_iter,
                     loop_cfg.horizon, m, PredictMode::kSample, true, terminal,
                     Rng::combine(seed, 5000 + static_cast<uint64_t>(iter)), penalized);

    for (int64_t g = 0; g < loop_cfg.updates_per_iter; ++g) {
      auto batch = mixed_batch(dataset, d_model, sac_cfg.batch, sac_cfg.real_fraction, batch_rng);
      result.agent->update(batch, batch_rng);
    }

    const bool last = iter + 1 == loop_cfg.iterations;
    if (last || (loop_cfg.eval_interval > 0 && (iter + 1) % loop_cfg.eval_interval == 0)) {
      auto rec = eval_record(env, *result.agent, loop_cfg.eval_episodes,
                             Rng::combine(seed, 7000 + static_cast<uint64_t>(iter)));
      nlohmann::ordered_json full;
      full["iteration"] = iter + 1;
      full["mean_return"] = rec["mean_return"];
      full["std_return"] = rec["std_return"];
      full["holdout_nll_per_k"] = report.holdout_nll_per_k;
      full["mean_uncertainty"] = u_count > 0 ? u_sum / static_cast<double>(u_count) : 0.0;
      full["h"] = loop_cfg.horizon;
      result.metrics.push_back(std::move(full));
      log_info("offline iter %lld: return %.1f, mean u %.4f", (long long)(iter + 1),
               rec["mean_return"].get<double>(),
               u_count > 0 ? u_sum / static_cast<double>(u_count) : 0.0);
    }
  }

  result.env_transitions = dataset.size();
  save_artifacts(out_dir, result, true);
  return result;
}

}  // namespace admpo
