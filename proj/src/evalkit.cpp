#include "admpo/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "admpo/errors.hpp"
#include "admpo/rollout.hpp"
#include "admpo/uncertainty.hpp"
#include "admpo/util.hpp"

namespace admpo {

namespace {

constexpr double kOverflow = static_cast<double>(std::numeric_limits<float>::max());

bool finite_vec(const std::vector<float>& v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// One evaluation window: an m-step seed plus L recorded future actions and
// the recorded ground-truth states they lead to.
struct EvalWindow {
  RolloutStart seed;
  std::vector<std::vector<float>> future_actions;  // length L
  std::vector<std::vector<float>> targets;         // recorded s_{+1..+L}
};

std::vector<EvalWindow> sample_eval_windows(const ReplayBuffer& data, int64_t m, int64_t L,
                                            int64_t count, uint64_t seed) {
  struct Pos {
    size_t episode_start;
    int64_t offset;
  };
  std::vector<Pos> all;
  size_t ep_start = 0;
  while (ep_start < data.size()) {
    const uint32_t ep = data.transition(ep_start).episode_id;
    size_t len = 0;
    while (ep_start + len < data.size() && data.transition(ep_start + len).episode_id == ep) ++len;
    const int64_t valid = static_cast<int64_t>(len) - L - m + 2;
    for (int64_t o = 0; o < valid; ++o) all.push_back({ep_start, o});
    ep_start += len;
  }
  if (all.empty())
    throw DataError("eval windows: no episode long enough for m=" + std::to_string(m) +
                    " and L=" + std::to_string(L));

  Rng rng = Rng::derive(seed, {streams::kRolloutStart});
  std::vector<EvalWindow> out;
  for (int64_t i = 0; i < count; ++i) {
    const Pos& pos = all[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(all.size()) - 1))];
    EvalWindow w;
    const size_t o = pos.episode_start + static_cast<size_t>(pos.offset);
    for (int64_t j = 0; j < m - 1; ++j) {
      w.seed.states.push_back(data.transition(o + static_cast<size_t>(j)).s);
      w.seed.actions.push_back(data.transition(o + static_cast<size_t>(j)).a);
    }
    w.seed.states.push_back(m >= 2 ? data.transition(o + static_cast<size_t>(m) - 2).s_next
                                   : data.transition(o).s);
    for (int64_t l = 0; l < L; ++l) {
      const Transition& t = data.transition(o + static_cast<size_t>(m) - 1 + static_cast<size_t>(l));
      w.future_actions.push_back(t.a);
      w.targets.push_back(t.s_next);
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Normalized L2 distance between a prediction and the recorded state.
double norm_l2(const std::vector<float>& a, const std::vector<float>& b,
               const std::vector<float>& s_std) {
  double e = 0;
  for (size_t j = 0; j < a.size(); ++j) {
    const double d = (static_cast<double>(a[j]) - static_cast<double>(b[j])) / s_std[j];
    e += d * d;
  }
  return std::sqrt(e);
}

// Generic open-loop evaluation: `step_fn(window_states, window_actions,
// future_action, rng)` produces the next mean-mode state or signals blow-up.
template <typename StepFn>
CompoundingErrorCurve run_open_loop(const std::string& model_id, const ReplayBuffer& data,
                                    int64_t seed_len, int64_t max_len, int64_t starts,
                                    uint64_t seed, const std::vector<float>& s_std,
                                    StepFn&& step_fn) {
  const auto windows = sample_eval_windows(data, seed_len, max_len, starts, seed);
  std::vector<std::vector<double>> per_len(static_cast<size_t>(max_len));
  for (size_t wi = 0; wi < windows.size(); ++wi) {
    const auto& w = windows[wi];
    std::vector<std::vector<float>> states = w.seed.states;
    std::vector<std::vector<float>> actions = w.seed.actions;
    Rng rng = Rng::derive(seed, {streams::kModelNoise, wi});
    bool blown = false;
    for (int64_t l = 0; l < max_len; ++l) {
      std::vector<float> next;
      if (!blown) {
        next = step_fn(states, actions, w.future_actions[static_cast<size_t>(l)], rng);
        if (next.empty() || !finite_vec(next)) blown = true;
      }
      if (blown) {
        per_len[static_cast<size_t>(l)].push_back(kOverflow);
        continue;
      }
      per_len[static_cast<size_t>(l)].push_back(
          norm_l2(next, w.targets[static_cast<size_t>(l)], s_std));
      // slide the window by one (state, action)
      if (seed_len > 1) {
        states.erase(states.begin());
        states.push_back(next);
        actions.erase(actions.begin());
        actions.push_back(w.future_actions[static_cast<size_t>(l)]);
      } else {
        states[0] = next;
      }
    }
  }

  CompoundingErrorCurve curve;
  curve.model_id = model_id;
  curve.starts = starts;
  for (int64_t l = 1; l <= max_len; ++l) {
    const auto& errs = per_len[static_cast<size_t>(l - 1)];
    double mean = 0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0;
    for (double e : errs) var += (e - mean) * (e - mean);
    curve.lengths.push_back(l);
    curve.mean_error.push_back(std::min(mean, kOverflow));
    curve.std_error.push_back(std::min(std::sqrt(var / static_cast<double>(errs.size())), kOverflow));
  }
  return curve;
}

}  // namespace

CompoundingErrorCurve compounding_error_adm(const AdmModel& model, const ReplayBuffer& data,
                                            int64_t max_len, int64_t starts, uint64_t seed) {
  const int64_t m = model.m();
  return run_open_loop(
      "adm", data, m, max_len, starts, seed, model.normalizer().s_std,
      [&](const std::vector<std::vector<float>>& states,
          const std::vector<std::vector<float>>& actions, const std::vector<float>& a,
          Rng& rng) -> std::vector<float> {
        const int64_t k = rng.uniform_int(1, m);
        std::vector<std::vector<float>> a_in;
        for (int64_t i = m - k; i <= m - 2; ++i) a_in.push_back(actions[static_cast<size_t>(i)]);
        a_in.push_back(a);
        const auto& s_in = states[static_cast<size_t>(m - k)];
        if (!finite_vec(s_in)) return {};
        try {
          return model.predict(s_in, a_in).mean_s;
        } catch (const Error&) {
          return {};
        }
      });
}

CompoundingErrorCurve compounding_error_bootstrap(const BootstrapRnnModel& model,
                                                  const ReplayBuffer& data, int64_t max_len,
                                                  int64_t starts, uint64_t seed) {
  const int64_t m = model.window();
  return run_open_loop(
      "bootstrap-rnn", data, m, max_len, starts, seed, model.normalizer().s_std,
      [&](const std::vector<std::vector<float>>& states,
          const std::vector<std::vector<float>>& actions, const std::vector<float>& a,
          Rng&) -> std::vector<float> {
        std::vector<std::vector<float>> a_in = actions;
        a_in.push_back(a);  // m pairs: m states with the fresh action last
        if (!finite_vec(states.back())) return {};
        try {
          return model.predict(states, a_in).mean_s;
        } catch (const Error&) {
          return {};
        }
      });
}

CompoundingErrorCurve compounding_error_ensemble(const EnsembleModel& model,
                                                 const ReplayBuffer& data, int64_t max_len,
                                                 int64_t starts, uint64_t seed, int64_t align_m) {
  return run_open_loop(
      "ensemble", data, align_m, max_len, starts, seed, model.normalizer().s_std,
      [&](const std::vector<std::vector<float>>& states,
          const std::vector<std::vector<float>>&, const std::vector<float>& a,
          Rng& rng) -> std::vector<float> {
        const auto& s = states.back();
        if (!finite_vec(s)) return {};
        try {
          return model.predict(s, a, rng).mean_s;
        } catch (const Error&) {
          return {};
        }
      });
}

CompoundingErrorCurve compounding_error_oracle(const Env& env, const ReplayBuffer& data,
                                               int64_t max_len, int64_t starts, uint64_t seed,
                                               int64_t m) {
  OracleDynamics oracle(env, m);
  std::vector<float> unit_std(static_cast<size_t>(env.spec().state_dim), 1.0f);
  return run_open_loop(
      "oracle", data, m, max_len, starts, seed, unit_std,
      [&](const std::vector<std::vector<float>>& states,
          const std::vector<std::vector<float>>& actions, const std::vector<float>& a,
          Rng& rng) -> std::vector<float> {
        const int64_t k = rng.uniform_int(1, m);
        std::vector<std::vector<float>> a_in;
        for (int64_t i = m - k; i <= m - 2; ++i) a_in.push_back(actions[static_cast<size_t>(i)]);
        a_in.push_back(a);
        return oracle.predict(states[static_cast<size_t>(m - k)], a_in, rng).mean_s;
      });
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys, bool* degenerate) {
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0 || syy <= 0) {
    if (degenerate) *degenerate = true;
    return 0;
  }
  if (degenerate) *degenerate = false;
  return sxy / std::sqrt(sxx * syy);
}

UncertaintyScatter uncertainty_scatter(const AdmModel& model, const ReplayBuffer& data,
                                       const Env& env, const SacAgent& agent,
                                       int64_t points_per_policy, int64_t horizon,
                                       uint64_t seed) {
  const int64_t m = model.m();
  const Normalizer& norm = model.normalizer();
  UncertaintyScatter out;

  // Recorded-action policy replaying one window's future actions.
  class RecordedPolicy final : public Policy {
   public:
    explicit RecordedPolicy(const std::vector<std::vector<float>>& actions) : actions_(actions) {}
    std::vector<float> act(const std::vector<float>&, Rng&) const override {
      return actions_[std::min(idx_++, actions_.size() - 1)];
    }

   private:
    const std::vector<std::vector<float>>& actions_;
    mutable size_t idx_ = 0;
  };

  RandomPolicy random_policy(env.spec().action_dim);
  AgentPolicy learned_policy(std::shared_ptr<const SacAgent>(&agent, [](const SacAgent*) {}),
                             SacAgent::ActMode::kSample);

  const int64_t trajs = (points_per_policy + horizon - 1) / horizon;
  const auto windows = sample_eval_windows(data, m, horizon, trajs, Rng::combine(seed, 17));

  auto collect = [&](const std::string& tag, const Policy& policy, uint64_t tag_seed,
                     double* mean_u) {
    double u_sum = 0;
    int64_t count = 0;
    for (int64_t ti = 0; ti < trajs && count < points_per_policy; ++ti) {
      const auto& w = windows[static_cast<size_t>(ti)];
      RecordedPolicy recorded(w.future_actions);
      const Policy& p = (tag == "behavior") ? static_cast<const Policy&>(recorded) : policy;
      AdmDynamics dyn(model);
      TrajectoryReport traj;
      try {
        traj = adm_roll(dyn, p, horizon, m, w.seed, PredictMode::kSample, true, nullptr,
                        Rng::combine(tag_seed, static_cast<uint64_t>(ti)));
      } catch (const Error&) {
        continue;  // blown-up roll-out contributes no points
      }
      for (const auto& step : traj.steps) {
        if (count >= points_per_policy) break;
        if (!finite_vec(step.s) || !finite_vec(step.a)) continue;
        const auto reading = adm_uncertainty(step.per_k, norm, m);
        // mixture-mean one-step prediction vs the true next state
        EnvState cur;
        cur.s = step.s;
        const auto true_next = env.step(cur, step.a).next.s;
        const auto tn = norm.norm_state(true_next);
        double err = 0;
        for (size_t j = 0; j < tn.size(); ++j) {
          double mu_bar = 0;
          for (int64_t k = 0; k < m; ++k) mu_bar += reading.mu_k[static_cast<size_t>(k)][j];
          mu_bar /= static_cast<double>(m);
          err += (mu_bar - tn[j]) * (mu_bar - tn[j]);
        }
        err = std::sqrt(err);
        out.points.push_back({reading.u, err, tag});
        u_sum += reading.u;
        ++count;
      }
    }
    if (mean_u) *mean_u = count > 0 ? u_sum / static_cast<double>(count) : 0.0;
  };

  collect("random", random_policy, Rng::combine(seed, 1), &out.mean_u_random);
  collect("learned", learned_policy, Rng::combine(seed, 2), &out.mean_u_learned);
  collect("behavior", random_policy, Rng::combine(seed, 3), &out.mean_u_behavior);

  std::vector<double> us, errs;
  for (const auto& p : out.points) {
    us.push_back(p.u);
    errs.push_back(p.err);
  }
  out.pearson_r = pearson(us, errs, &out.degenerate);
  return out;
}

std::vector<SweepRow> m_sweep(const Env& env, const ReplayBuffer& dataset,
                              const AdmConfig& model_cfg, const SacConfig& sac_cfg,
                              const OfflineLoopConfig& loop_cfg,
                              const std::vector<int64_t>& m_values,
                              const std::vector<uint64_t>& seeds) {
  if (m_values.empty()) throw ConfigError("m_sweep: need at least one m value");
  std::vector<SweepRow> rows;
  for (int64_t m : m_values) {
    if (m < 1) throw ConfigError("m_sweep: m values must be >= 1");
    AdmConfig cfg = model_cfg;
    cfg.m = m;
    std::vector<double> finals;
    for (uint64_t s : seeds) {
      auto result = run_offline(env, dataset, cfg, sac_cfg, loop_cfg, Rng::combine(s, static_cast<uint64_t>(m)));
      finals.push_back(result.metrics.back()["mean_return"].get<double>());
      log_info("m-sweep: m=%lld seed=%llu final return %.1f", (long long)m,
               (unsigned long long)s, finals.back());
    }
    SweepRow row;
    row.m = m;
    for (double f : finals) row.mean_return += f;
    row.mean_return /= static_cast<double>(finals.size());
    for (double f : finals)
      row.std_return += (f - row.mean_return) * (f - row.mean_return);
    row.std_return = std::sqrt(row.std_return / static_cast<double>(finals.size()));
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("csv: cannot open '" + path + "'");
  return out;
}

}  // namespace

void write_curve_csv(const std::string& path, const CompoundingErrorCurve& curve) {
  auto out = open_csv(path);
  out << "# open-loop error: L2 over normalized state dims, model=" << curve.model_id
      << ", starts=" << curve.starts << "\n";
  out << "length,mean_error,std_error\n";
  for (size_t i = 0; i < curve.lengths.size(); ++i)
    out << curve.lengths[i] << "," << fmt_double(curve.mean_error[i]) << ","
        << fmt_double(curve.std_error[i]) << "\n";
}

void write_scatter_csv(const std::string& path, const UncertaintyScatter& scatter) {
  auto out = open_csv(path);
  out << "# one-step model error vs closed-form uncertainty, normalized state space; pearson_r="
      << fmt_double(scatter.pearson_r) << (scatter.degenerate ? " (degenerate)" : "") << "\n";
  out << "u,err,policy_tag\n";
  for (const auto& p : scatter.points)
    out << fmt_double(p.u) << "," << fmt_double(p.err) << "," << p.policy << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_csv(path);
  out << "m,mean_return,std_return\n";
  for (const auto& r : rows)
    out << r.m << "," << fmt_double(r.mean_return) << "," << fmt_double(r.std_return) << "\n";
}

}  // namespace admpo
