#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "admpo/data.hpp"
#include "admpo/nn.hpp"
#include "admpo/optim.hpp"
#include "admpo/rng.hpp"
#include "admpo/tape.hpp"
#include "admpo/tensor.hpp"

namespace admpo {

struct AdmConfig {
  int64_t m = 5;
  int64_t gru_hidden = 200;
  int64_t head_hidden = 200;
  int64_t head_layers = 2;
  double logstd_min = -10.0;
  double logstd_max = 0.5;
  double lr = 1e-3;
  int64_t batch = 256;
  double holdout_fraction = 0.1;
  int64_t patience = 5;  // epochs without holdout improvement before stopping
  int64_t max_epochs = 200;
  double bound_reg_weight = 1e-4;
  int64_t holdout_windows_per_k = 1024;

  void validate() const;
};

// Diagonal Gaussian over (next state, reward) in raw environment units.
struct GaussianPrediction {
  std::vector<float> mean_s;
  std::vector<float> std_s;
  float mean_r = 0;
  float std_r = 1;
};

// Per-dimension affine normalization fitted on a replay buffer. The model
// consumes normalized states/actions and regresses normalized state deltas
// and rewards; std is floored so constant dimensions stay harmless.
struct Normalizer {
  std::vector<float> s_mean, s_std;
  std::vector<float> a_mean, a_std;
  float r_mean = 0, r_std = 1;

  static Normalizer fit(const ReplayBuffer& data);
  static Normalizer identity(int64_t state_dim, int64_t action_dim);

  std::vector<float> norm_state(const std::vector<float>& s) const;
  std::vector<float> norm_action(const std::vector<float>& a) const;

  nlohmann::ordered_json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

// GRU encoder over per-step inputs plus two Gaussian head MLPs branching
// from the final hidden state. Works in normalized space; templated so the
// same graph can be built in double for finite-difference checks.
template <typename T>
struct AdmNet {
  GruCell<T> gru;
  Mlp<T> state_head;   // hidden -> 2*state_dim (mean, raw log-std)
  Mlp<T> reward_head;  // hidden -> 2
  int64_t state_dim = 0, action_dim = 0;
  T logstd_lo = T(-10), logstd_hi = T(0.5);

  static AdmNet init(int64_t state_dim, int64_t action_dim, int64_t gru_hidden,
                     int64_t head_hidden, int64_t head_layers, T lo, T hi, Rng& rng) {
    AdmNet n;
    n.state_dim = state_dim;
    n.action_dim = action_dim;
    n.logstd_lo = lo;
    n.logstd_hi = hi;
    n.gru = GruCell<T>::init(state_dim + action_dim, gru_hidden, rng);
    std::vector<int64_t> hidden(static_cast<size_t>(head_layers), head_hidden);
    n.state_head = Mlp<T>::init(gru_hidden, hidden, 2 * state_dim, rng, Activation::kSwish);
    n.reward_head = Mlp<T>::init(gru_hidden, hidden, 2, rng, Activation::kSwish);
    return n;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    gru.visit(prefix + ".gru", f);
    state_head.visit(prefix + ".state_head", f);
    reward_head.visit(prefix + ".reward_head", f);
  }

  struct RawOut {
    Tensor<T> mu_s, logstd_s;  // [B, ds], soft-clamped
    Tensor<T> mu_r, logstd_r;  // [B, 1]
  };

  // xs[step] is a [B, ds+da] input batch; all rows share sequence length.
  RawOut forward(const std::vector<Tensor<T>>& xs) const {
    const int64_t b = xs.front().shape[0];
    Tensor<T> h = Tensor<T>::zeros({b, gru.hidden_dim});
    for (const auto& x : xs) h = gru.step(x, h);
    Tensor<T> so = state_head.apply(h);
    Tensor<T> ro = reward_head.apply(h);
    RawOut out;
    out.mu_s = Tensor<T>::zeros({b, state_dim});
    out.logstd_s = Tensor<T>::zeros({b, state_dim});
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < state_dim; ++j) {
        out.mu_s.data[i * state_dim + j] = so.data[i * 2 * state_dim + j];
        out.logstd_s.data[i * state_dim + j] =
            soft_clamp_raw(so.data[i * 2 * state_dim + state_dim + j], logstd_lo, logstd_hi);
      }
    out.mu_r = Tensor<T>::zeros({b, 1});
    out.logstd_r = Tensor<T>::zeros({b, 1});
    for (int64_t i = 0; i < b; ++i) {
      out.mu_r.data[i] = ro.data[i * 2];
      out.logstd_r.data[i] = soft_clamp_raw(ro.data[i * 2 + 1], logstd_lo, logstd_hi);
    }
    return out;
  }

  struct BoundNet {
    typename GruCell<T>::Bound gru;
    typename Mlp<T>::Bound state_head, reward_head;
  };

  BoundNet bind(Binder<T>& b) {
    return BoundNet{gru.bind(b), state_head.bind(b), reward_head.bind(b)};
  }

  struct GraphOut {
    typename Tape<T>::Id mu_s, logstd_s, raw_logstd_s;
    typename Tape<T>::Id mu_r, logstd_r, raw_logstd_r;
  };

  GraphOut forward_graph(Tape<T>& t, const BoundNet& net,
                         const std::vector<typename Tape<T>::Id>& xs) const {
    const int64_t b = t.value(xs.front()).shape[0];
    auto h = t.constant(Tensor<T>::zeros({b, gru.hidden_dim}));
    for (auto x : xs) h = net.gru.step(t, x, h);
    auto so = net.state_head.apply(t, h);
    auto ro = net.reward_head.apply(t, h);
    GraphOut out;
    out.mu_s = t.slice_cols(so, 0, state_dim);
    out.raw_logstd_s = t.slice_cols(so, state_dim, 2 * state_dim);
    out.logstd_s = soft_clamp(t, out.raw_logstd_s, logstd_lo, logstd_hi);
    out.mu_r = t.slice_cols(ro, 0, 1);
    out.raw_logstd_r = t.slice_cols(ro, 1, 2);
    out.logstd_r = soft_clamp(t, out.raw_logstd_r, logstd_lo, logstd_hi);
    return out;
  }
};

// Assembles the per-step input batch for a group of same-k samples:
// each step's input row is concat(normalized start state, normalized action).
// The start state is duplicated across all k steps.
template <typename T>
std::vector<Tensor<T>> adm_inputs(const std::vector<SequenceSample>& group,
                                  const Normalizer& norm) {
  const int64_t b = static_cast<int64_t>(group.size());
  const int64_t k = group.front().k;
  const int64_t ds = static_cast<int64_t>(group.front().s_start.size());
  const int64_t da = static_cast<int64_t>(group.front().actions.front().size());
  std::vector<Tensor<T>> xs;
  for (int64_t step = 0; step < k; ++step) {
    Tensor<T> x = Tensor<T>::zeros({b, ds + da});
    for (int64_t i = 0; i < b; ++i) {
      const auto ns = norm.norm_state(group[static_cast<size_t>(i)].s_start);
      const auto na = norm.norm_action(group[static_cast<size_t>(i)].actions[static_cast<size_t>(step)]);
      for (int64_t j = 0; j < ds; ++j) x.data[i * (ds + da) + j] = static_cast<T>(ns[static_cast<size_t>(j)]);
      for (int64_t j = 0; j < da; ++j) x.data[i * (ds + da) + ds + j] = static_cast<T>(na[static_cast<size_t>(j)]);
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

// Normalized regression targets for a same-k group: state delta
// (s_end - s_start) / s_std and normalized end reward.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> adm_targets(const std::vector<SequenceSample>& group,
                                            const Normalizer& norm) {
  const int64_t b = static_cast<int64_t>(group.size());
  const int64_t ds = static_cast<int64_t>(group.front().s_start.size());
  Tensor<T> delta = Tensor<T>::zeros({b, ds});
  Tensor<T> rew = Tensor<T>::zeros({b, 1});
  for (int64_t i = 0; i < b; ++i) {
    const auto& s = group[static_cast<size_t>(i)];
    for (int64_t j = 0; j < ds; ++j)
      delta.data[i * ds + j] =
          static_cast<T>((s.s_end[static_cast<size_t>(j)] - s.s_start[static_cast<size_t>(j)]) /
                         norm.s_std[static_cast<size_t>(j)]);
    rew.data[i] = static_cast<T>((s.r_end - norm.r_mean) / norm.r_std);
  }
  return {std::move(delta), std::move(rew)};
}

// Builds the summed NLL (plus soft-clamp bound regularizer) graph for a
// same-k group. Returns (nll_sum, reg_sum) node ids.
template <typename T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> adm_group_loss(
    Tape<T>& t, const AdmNet<T>& net, const typename AdmNet<T>::BoundNet& bound,
    const std::vector<SequenceSample>& group, const Normalizer& norm) {
  auto xs_t = adm_inputs<T>(group, norm);
  std::vector<typename Tape<T>::Id> xs;
  for (auto& x : xs_t) xs.push_back(t.constant(std::move(x)));
  auto [delta, rew] = adm_targets<T>(group, norm);
  auto out = net.forward_graph(t, bound, xs);
  auto nll = t.add(t.reduce_sum(t.gaussian_nll(out.mu_s, out.logstd_s, delta)),
                   t.reduce_sum(t.gaussian_nll(out.mu_r, out.logstd_r, rew)));
  // keep raw log-std outputs from drifting far outside the clamp interval
  auto over_s = t.softplus(t.add_scalar(out.raw_logstd_s, -net.logstd_hi));
  auto under_s = t.softplus(t.add_scalar(t.scale(out.raw_logstd_s, T(-1)), net.logstd_lo));
  auto over_r = t.softplus(t.add_scalar(out.raw_logstd_r, -net.logstd_hi));
  auto under_r = t.softplus(t.add_scalar(t.scale(out.raw_logstd_r, T(-1)), net.logstd_lo));
  auto reg = t.add(t.add(t.reduce_sum(over_s), t.reduce_sum(under_s)),
                   t.add(t.reduce_sum(over_r), t.reduce_sum(under_r)));
  return {nll, reg};
}

struct TrainReport {
  int64_t epochs = 0;
  int64_t grad_steps = 0;
  double best_holdout_nll = 0;
  std::vector<double> holdout_nll_per_k;  // at the best epoch
  std::vector<double> epoch_train_loss;
};

// The any-step dynamics model: predicts (s_{t+k}, r_{t+k}) from the k-step
// plan (s_t, a_{t:t+k-1}) for any k in [1, m]. Predictions are diagonal
// Gaussians; the state mean is s_t plus a denormalized delta.
class AdmModel {
 public:
  AdmModel(const AdmConfig& cfg, int64_t state_dim, int64_t action_dim, uint64_t init_seed);

  int64_t m() const { return cfg_.m; }
  int64_t state_dim() const { return state_dim_; }
  int64_t action_dim() const { return action_dim_; }
  const AdmConfig& config() const { return cfg_; }
  const Normalizer& normalizer() const { return norm_; }
  AdmNet<float>& net() { return net_; }
  const AdmNet<float>& net() const { return net_; }

  void set_normalizer(const Normalizer& n) { norm_ = n; }

  GaussianPrediction predict(const std::vector<float>& s,
                             const std::vector<std::vector<float>>& actions) const;

  // Mean NLL of a batch under the current parameters (graph-free).
  double nll(const std::vector<SequenceSample>& batch) const;

  TrainReport train(const ReplayBuffer& data, uint64_t seed);

  void save(const std::string& prefix) const;  // prefix.admp + prefix.json
  static AdmModel load(const std::string& prefix);

 private:
  AdmConfig cfg_;
  int64_t state_dim_, action_dim_;
  AdmNet<float> net_;
  Normalizer norm_;
  Adam<float> opt_;
};

// Probabilistic ensemble baseline: independent single-step Gaussian MLPs on
// (s, a); prediction samples a uniformly random elite member.
struct EnsembleConfig {
  int64_t members = 7;
  int64_t elites = 5;
  int64_t hidden = 200;
  int64_t layers = 2;
  double logstd_min = -10.0;
  double logstd_max = 0.5;
  double lr = 1e-3;
  int64_t batch = 256;
  double holdout_fraction = 0.1;
  int64_t patience = 5;
  int64_t max_epochs = 200;
  double bound_reg_weight = 1e-4;
  int64_t holdout_windows = 4096;
};

class EnsembleModel {
 public:
  struct Member {
    Mlp<float> state_head;
    Mlp<float> reward_head;
  };

  EnsembleModel(const EnsembleConfig& cfg, int64_t state_dim, int64_t action_dim,
                uint64_t init_seed);

  TrainReport train(const ReplayBuffer& data, uint64_t seed);

  // Single-step prediction via a uniformly sampled elite member.
  GaussianPrediction predict(const std::vector<float>& s, const std::vector<float>& a,
                             Rng& rng) const;
  GaussianPrediction predict_member(const std::vector<float>& s, const std::vector<float>& a,
                                    int64_t member) const;
  const std::vector<int64_t>& elites() const { return elites_; }
  const Normalizer& normalizer() const { return norm_; }
  Member& member(int64_t i) { return members_.at(static_cast<size_t>(i)); }

  // Re-ranks elites by NLL on the given windows (lowest first).
  void rank_elites(const std::vector<SequenceSample>& windows);

 private:
  friend double ensemble_member_holdout_nll(const EnsembleModel&, int64_t,
                                            const std::vector<SequenceSample>&);

  EnsembleConfig cfg_;
  int64_t state_dim_, action_dim_;
  std::vector<Member> members_;
  std::vector<int64_t> elites_;
  Normalizer norm_;
};

// Bootstrapping RNN baseline: same encoder/head structure as the ADM but
// conditioned on the full (s, a) pair history of a fixed m-step window,
// always predicting one step past the window. Rolling it out feeds its own
// predictions back as inputs.
class BootstrapRnnModel {
 public:
  BootstrapRnnModel(const AdmConfig& cfg, int64_t state_dim, int64_t action_dim,
                    uint64_t init_seed);

  int64_t window() const { return cfg_.m; }
  const Normalizer& normalizer() const { return norm_; }

  TrainReport train(const ReplayBuffer& data, uint64_t seed);

  // states/actions: the last `window()` (s, a) pairs, oldest first.
  GaussianPrediction predict(const std::vector<std::vector<float>>& states,
                             const std::vector<std::vector<float>>& actions) const;

 private:
  AdmConfig cfg_;
  int64_t state_dim_, action_dim_;
  AdmNet<float> net_;
  Normalizer norm_;
  Adam<float> opt_;
};

}  // namespace admpo
