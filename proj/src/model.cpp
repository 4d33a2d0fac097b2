#include "admpo/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "admpo/checkpoint.hpp"
#include "admpo/errors.hpp"
#include "admpo/util.hpp"

namespace admpo {

void AdmConfig::validate() const {
  if (m < 1) throw ConfigError("model.m must be >= 1");
  if (logstd_min >= logstd_max) throw ConfigError("model.logstd_min must be below model.logstd_max");
  if (batch < 1) throw ConfigError("model.batch must be >= 1");
  if (holdout_fraction <= 0 || holdout_fraction >= 1)
    throw ConfigError("model.holdout_fraction must be in (0, 1)");
}

Normalizer Normalizer::fit(const ReplayBuffer& data) {
  if (data.size() == 0) throw ConfigError("normalizer: cannot fit on an empty buffer");
  const int64_t ds = data.state_dim(), da = data.action_dim();
  Normalizer n = identity(ds, da);
  std::vector<double> sm(ds, 0), sa(da, 0);
  double rm = 0;
  const double count = static_cast<double>(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    const Transition& t = data.transition(i);
    for (int64_t j = 0; j < ds; ++j) sm[j] += t.s[j];
    for (int64_t j = 0; j < da; ++j) sa[j] += t.a[j];
    rm += t.r;
  }
  for (auto& v : sm) v /= count;
  for (auto& v : sa) v /= count;
  rm /= count;
  std::vector<double> sv(ds, 0), av(da, 0);
  double rv = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const Transition& t = data.transition(i);
    for (int64_t j = 0; j < ds; ++j) sv[j] += (t.s[j] - sm[j]) * (t.s[j] - sm[j]);
    for (int64_t j = 0; j < da; ++j) av[j] += (t.a[j] - sa[j]) * (t.a[j] - sa[j]);
    rv += (t.r - rm) * (t.r - rm);
  }
  const auto floor_std = [](double var, double cnt) {
    return std::max(std::sqrt(var / cnt), 1e-4);
  };
  for (int64_t j = 0; j < ds; ++j) {
    n.s_mean[j] = static_cast<float>(sm[j]);
    n.s_std[j] = static_cast<float>(floor_std(sv[j], count));
  }
  for (int64_t j = 0; j < da; ++j) {
    n.a_mean[j] = static_cast<float>(sa[j]);
    n.a_std[j] = static_cast<float>(floor_std(av[j], count));
  }
  n.r_mean = static_cast<float>(rm);
  n.r_std = static_cast<float>(floor_std(rv, count));
  return n;
}

Normalizer Normalizer::identity(int64_t state_dim, int64_t action_dim) {
  Normalizer n;
  n.s_mean.assign(state_dim, 0.0f);
  n.s_std.assign(state_dim, 1.0f);
  n.a_mean.assign(action_dim, 0.0f);
  n.a_std.assign(action_dim, 1.0f);
  return n;
}

std::vector<float> Normalizer::norm_state(const std::vector<float>& s) const {
  std::vector<float> out(s.size());
  for (size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - s_mean[i]) / s_std[i];
  return out;
}

std::vector<float> Normalizer::norm_action(const std::vector<float>& a) const {
  std::vector<float> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - a_mean[i]) / a_std[i];
  return out;
}

nlohmann::ordered_json Normalizer::to_json() const {
  nlohmann::ordered_json j;
  j["s_mean"] = s_mean;
  j["s_std"] = s_std;
  j["a_mean"] = a_mean;
  j["a_std"] = a_std;
  j["r_mean"] = r_mean;
  j["r_std"] = r_std;
  return j;
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  n.s_mean = j.at("s_mean").get<std::vector<float>>();
  n.s_std = j.at("s_std").get<std::vector<float>>();
  n.a_mean = j.at("a_mean").get<std::vector<float>>();
  n.a_std = j.at("a_std").get<std::vector<float>>();
  n.r_mean = j.at("r_mean").get<float>();
  n.r_std = j.at("r_std").get<float>();
  return n;
}

namespace {

// Shared early-stopping scaffold: tracks the best score and a parameter
// snapshot, restores the best parameters when training ends.
template <typename Net>
class BestTracker {
 public:
  explicit BestTracker(Net& net) : net_(net) {}

  bool observe(double score) {
    if (!has_best_ || score < best_ - 1e-9) {
      best_ = score;
      has_best_ = true;
      snapshot_.clear();
      net_.visit("", [&](const std::string&, Tensor<float>& p) { snapshot_.push_back(p); });
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  int64_t epochs_since_best() const { return stale_; }
  double best() const { return best_; }

  void restore() {
    if (!has_best_) return;
    size_t i = 0;
    net_.visit("", [&](const std::string&, Tensor<float>& p) { p = snapshot_[i++]; });
  }

 private:
  Net& net_;
  std::vector<Tensor<float>> snapshot_;
  double best_ = 0;
  bool has_best_ = false;
  int64_t stale_ = 0;
};

// Holdout episode mask: deterministically marks ~fraction of episodes.
std::pair<std::vector<uint8_t>, std::vector<uint8_t>> split_episodes(size_t n_episodes,
                                                                     double fraction,
                                                                     uint64_t seed) {
  if (n_episodes < 2)
    throw ConfigError("model train: need at least 2 episodes for a holdout split, have " +
                      std::to_string(n_episodes));
  std::vector<size_t> order(n_episodes);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng = Rng::derive(seed, {streams::kHoldout});
  for (size_t i = n_episodes - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  const size_t holdout = std::max<size_t>(1, static_cast<size_t>(std::llround(
                                                 fraction * static_cast<double>(n_episodes))));
  std::vector<uint8_t> train_mask(n_episodes, 1), holdout_mask(n_episodes, 0);
  for (size_t i = 0; i < holdout && i < n_episodes - 1; ++i) {
    train_mask[order[i]] = 0;
    holdout_mask[order[i]] = 1;
  }
  return {train_mask, holdout_mask};
}

std::map<int64_t, std::vector<SequenceSample>> group_by_k(std::vector<SequenceSample> batch) {
  std::map<int64_t, std::vector<SequenceSample>> groups;
  for (auto& s : batch) groups[s.k].push_back(std::move(s));
  return groups;
}

double sample_raw_nll(const typename AdmNet<float>::RawOut& out, const Tensor<float>& delta,
                      const Tensor<float>& rew, int64_t row) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
  const int64_t ds = out.mu_s.shape[1];
  double nll = 0;
  for (int64_t j = 0; j < ds; ++j) {
    const double mu = out.mu_s.data[row * ds + j];
    const double ls = out.logstd_s.data[row * ds + j];
    const double d = delta.data[row * ds + j] - mu;
    nll += 0.5 * kLog2Pi + ls + 0.5 * d * d * std::exp(-2 * ls);
  }
  const double mu_r = out.mu_r.data[row];
  const double ls_r = out.logstd_r.data[row];
  const double dr = rew.data[row] - mu_r;
  nll += 0.5 * kLog2Pi + ls_r + 0.5 * dr * dr * std::exp(-2 * ls_r);
  return nll;
}

}  // namespace

AdmModel::AdmModel(const AdmConfig& cfg, int64_t state_dim, int64_t action_dim, uint64_t init_seed)
    : cfg_(cfg),
      state_dim_(state_dim),
      action_dim_(action_dim),
      net_(),
      norm_(Normalizer::identity(state_dim, action_dim)),
      opt_(static_cast<float>(cfg.lr)) {
  cfg_.validate();
  Rng rng = Rng::derive(init_seed, {streams::kInit});
  net_ = AdmNet<float>::init(state_dim, action_dim, cfg_.gru_hidden, cfg_.head_hidden,
                             cfg_.head_layers, static_cast<float>(cfg_.logstd_min),
                             static_cast<float>(cfg_.logstd_max), rng);
}

GaussianPrediction AdmModel::predict(const std::vector<float>& s,
                                     const std::vector<std::vector<float>>& actions) const {
  const int64_t k = static_cast<int64_t>(actions.size());
  if (k < 1 || k > cfg_.m)
    throw UsageError("adm predict: k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(cfg_.m) + "]");
  if (static_cast<int64_t>(s.size()) != state_dim_)
    throw UsageError("adm predict: state dim mismatch");
  for (float v : s)
    if (!std::isfinite(v)) throw UsageError("adm predict: non-finite state");
  for (const auto& a : actions) {
    if (static_cast<int64_t>(a.size()) != action_dim_)
      throw UsageError("adm predict: action dim mismatch");
    for (float v : a)
      if (!std::isfinite(v)) throw UsageError("adm predict: non-finite action");
  }

  const auto ns = norm_.norm_state(s);
  std::vector<Tensor<float>> xs;
  for (int64_t i = 0; i < k; ++i) {
    Tensor<float> x = Tensor<float>::zeros({1, state_dim_ + action_dim_});
    const auto na = norm_.norm_action(actions[static_cast<size_t>(i)]);
    for (int64_t j = 0; j < state_dim_; ++j) x.data[j] = ns[static_cast<size_t>(j)];
    for (int64_t j = 0; j < action_dim_; ++j) x.data[state_dim_ + j] = na[static_cast<size_t>(j)];
    xs.push_back(std::move(x));
  }
  const auto out = net_.forward(xs);

  GaussianPrediction p;
  p.mean_s.resize(static_cast<size_t>(state_dim_));
  p.std_s.resize(static_cast<size_t>(state_dim_));
  for (int64_t j = 0; j < state_dim_; ++j) {
    p.mean_s[j] = s[j] + out.mu_s.data[j] * norm_.s_std[j];
    p.std_s[j] = std::exp(out.logstd_s.data[j]) * norm_.s_std[j];
  }
  p.mean_r = norm_.r_mean + out.mu_r.data[0] * norm_.r_std;
  p.std_r = std::exp(out.logstd_r.data[0]) * norm_.r_std;

  for (float v : p.mean_s)
    if (!std::isfinite(v)) throw TrainingError("adm predict: non-finite state mean");
  for (float v : p.std_s)
    if (!(v > 0) || !std::isfinite(v)) throw TrainingError("adm predict: invalid state std");
  if (!std::isfinite(p.mean_r) || !(p.std_r > 0) || !std::isfinite(p.std_r))
    throw TrainingError("adm predict: invalid reward prediction");
  return p;
}

double AdmModel::nll(const std::vector<SequenceSample>& batch) const {
  if (batch.empty()) throw UsageError("adm nll: empty batch");
  auto groups = group_by_k(batch);
  double total = 0;
  for (const auto& [k, group] : groups) {
    (void)k;
    const auto xs = adm_inputs<float>(group, norm_);
    const auto [delta, rew] = adm_targets<float>(group, norm_);
    const auto out = net_.forward(xs);
    for (int64_t i = 0; i < static_cast<int64_t>(group.size()); ++i)
      total += sample_raw_nll(out, delta, rew, i);
  }
  return total / static_cast<double>(batch.size());
}

TrainReport AdmModel::train(const ReplayBuffer& data, uint64_t seed) {
  norm_ = Normalizer::fit(data);
  const auto [train_mask, holdout_mask] = split_episodes(data.num_episodes(),
                                                         cfg_.holdout_fraction, seed);
  // both splits must support every k in [1, m]
  for (int64_t k = 1; k <= cfg_.m; ++k) {
    try {
      (void)data.enumerate_sequences(k, 1, &train_mask);
      (void)data.enumerate_sequences(k, 1, &holdout_mask);
    } catch (const DataError&) {
      throw ConfigError("adm train: insufficient data for k=" + std::to_string(k) +
                        " windows (m=" + std::to_string(cfg_.m) + ")");
    }
  }

  // one epoch sweeps the training split once in expectation
  size_t train_episodes = 0;
  for (size_t ei = 0; ei < data.num_episodes(); ++ei)
    if (train_mask[ei]) ++train_episodes;
  const int64_t train_transitions = static_cast<int64_t>(
      data.size() * train_episodes / std::max<size_t>(1, data.num_episodes()));
  const int64_t batches_per_epoch = std::max<int64_t>(1, train_transitions / cfg_.batch);

  Rng batch_rng = Rng::derive(seed, {streams::kBatch});
  BestTracker<AdmNet<float>> best(net_);
  TrainReport report;

  auto holdout_score = [&](std::vector<double>* per_k) {
    double avg = 0;
    for (int64_t k = 1; k <= cfg_.m; ++k) {
      const auto windows = data.enumerate_sequences(k, cfg_.holdout_windows_per_k, &holdout_mask);
      const double v = nll(windows);
      if (per_k) per_k->push_back(v);
      avg += v;
    }
    return avg / static_cast<double>(cfg_.m);
  };

  for (int64_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    double epoch_loss = 0;
    for (int64_t b = 0; b < batches_per_epoch; ++b) {
      auto batch = data.sample_sequences(cfg_.batch, cfg_.m, KPolicy::kUniform, batch_rng,
                                         &train_mask);
      auto groups = group_by_k(std::move(batch));

      Tape<float> tape;
      Binder<float> binder(tape);
      const auto bound = net_.bind(binder);
      Tape<float>::Id nll_total = -1, reg_total = -1;
      try {
        for (const auto& [k, group] : groups) {
          (void)k;
          auto [nll_sum, reg_sum] = adm_group_loss(tape, net_, bound, group, norm_);
          nll_total = nll_total < 0 ? nll_sum : tape.add(nll_total, nll_sum);
          reg_total = reg_total < 0 ? reg_sum : tape.add(reg_total, reg_sum);
        }
        const float inv_b = 1.0f / static_cast<float>(cfg_.batch);
        auto loss = tape.add(tape.scale(nll_total, inv_b),
                             tape.scale(reg_total, static_cast<float>(cfg_.bound_reg_weight) * inv_b));
        tape.backward(loss);
        epoch_loss += tape.value(loss).data[0];
      } catch (const TrainingError&) {
        // locate the offending sample for the diagnostic
        int64_t idx = 0;
        for (const auto& [k, group] : groups) {
          (void)k;
          for (const auto& s : group) {
            try {
              (void)nll({s});
            } catch (...) {
              throw TrainingError("adm train: non-finite loss at sample index " +
                                  std::to_string(idx));
            }
            ++idx;
          }
        }
        throw TrainingError("adm train: non-finite loss");
      }

      std::vector<Tensor<float>*> params;
      std::vector<const Tensor<float>*> grads;
      for (size_t i = 0; i < binder.size(); ++i) {
        params.push_back(binder.param(i));
        grads.push_back(&binder.grad(i));
      }
      opt_.step(params, grads);
      ++report.grad_steps;
    }
    report.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
    ++report.epochs;

    std::vector<double> per_k;
    const double score = holdout_score(&per_k);
    if (best.observe(score)) {
      report.best_holdout_nll = score;
      report.holdout_nll_per_k = per_k;
    }
    if (best.epochs_since_best() >= cfg_.patience) break;
  }
  best.restore();
  return report;
}

void AdmModel::save(const std::string& prefix) const {
  auto* self = const_cast<AdmModel*>(this);
  save_checkpoint(prefix + ".admp", collect_params(self->net_, "adm"));
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "adm";
  j["m"] = cfg_.m;
  j["state_dim"] = state_dim_;
  j["action_dim"] = action_dim_;
  j["gru_hidden"] = cfg_.gru_hidden;
  j["head_hidden"] = cfg_.head_hidden;
  j["head_layers"] = cfg_.head_layers;
  j["logstd_min"] = cfg_.logstd_min;
  j["logstd_max"] = cfg_.logstd_max;
  j["delta_parameterization"] = "normalized-state-delta";
  j["normalizer"] = norm_.to_json();
  std::ofstream out(prefix + ".json", std::ios::trunc);
  if (!out) throw IoError("adm save: cannot open '" + prefix + ".json'");
  out << j.dump(2) << "\n";
}

AdmModel AdmModel::load(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw IoError("adm load: cannot open '" + prefix + ".json'");
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("kind", "") != "adm") throw IoError("adm load: '" + prefix + "' is not an adm checkpoint");
  AdmConfig cfg;
  cfg.m = j.at("m").get<int64_t>();
  cfg.gru_hidden = j.at("gru_hidden").get<int64_t>();
  cfg.head_hidden = j.at("head_hidden").get<int64_t>();
  cfg.head_layers = j.at("head_layers").get<int64_t>();
  cfg.logstd_min = j.at("logstd_min").get<double>();
  cfg.logstd_max = j.at("logstd_max").get<double>();
  AdmModel model(cfg, j.at("state_dim").get<int64_t>(), j.at("action_dim").get<int64_t>(), 0);
  model.norm_ = Normalizer::from_json(j.at("normalizer"));
  restore_params(model.net_, "adm", load_checkpoint(prefix + ".admp"));
  return model;
}

// ---------------- ensemble baseline ----------------

EnsembleModel::EnsembleModel(const EnsembleConfig& cfg, int64_t state_dim, int64_t action_dim,
                             uint64_t init_seed)
    : cfg_(cfg), state_dim_(state_dim), action_dim_(action_dim),
      norm_(Normalizer::identity(state_dim, action_dim)) {
  if (cfg_.members < 1 || cfg_.elites < 1 || cfg_.elites > cfg_.members)
    throw ConfigError("ensemble: need 1 <= elites <= members");
  std::vector<int64_t> hidden(static_cast<size_t>(cfg_.layers), cfg_.hidden);
  for (int64_t mem = 0; mem < cfg_.members; ++mem) {
    Rng rng = Rng::derive(init_seed, {streams::kInit, static_cast<uint64_t>(mem)});
    Member m;
    m.state_head = Mlp<float>::init(state_dim + action_dim, hidden, 2 * state_dim, rng,
                                    Activation::kSwish);
    m.reward_head = Mlp<float>::init(state_dim + action_dim, hidden, 2, rng, Activation::kSwish);
    members_.push_back(std::move(m));
  }
  elites_.resize(static_cast<size_t>(cfg_.elites));
  std::iota(elites_.begin(), elites_.end(), int64_t{0});
}

namespace {

// view over one ensemble member's heads so BestTracker can snapshot them
struct MemberNets {
  Mlp<float>* s;
  Mlp<float>* r;
  template <typename F>
  void visit(const std::string& p, F&& f) {
    s->visit(p + ".s", f);
    r->visit(p + ".r", f);
  }
};

Tensor<float> ensemble_inputs(const std::vector<SequenceSample>& group, const Normalizer& norm) {
  const int64_t b = static_cast<int64_t>(group.size());
  const int64_t ds = static_cast<int64_t>(group.front().s_start.size());
  const int64_t da = static_cast<int64_t>(group.front().actions.front().size());
  Tensor<float> x = Tensor<float>::zeros({b, ds + da});
  for (int64_t i = 0; i < b; ++i) {
    const auto ns = norm.norm_state(group[static_cast<size_t>(i)].s_start);
    const auto na = norm.norm_action(group[static_cast<size_t>(i)].actions[0]);
    for (int64_t j = 0; j < ds; ++j) x.data[i * (ds + da) + j] = ns[static_cast<size_t>(j)];
    for (int64_t j = 0; j < da; ++j) x.data[i * (ds + da) + ds + j] = na[static_cast<size_t>(j)];
  }
  return x;
}

}  // namespace

double ensemble_member_holdout_nll(const EnsembleModel& model, int64_t member,
                                   const std::vector<SequenceSample>& windows) {
  const auto& mem = model.members_[static_cast<size_t>(member)];
  const auto x = ensemble_inputs(windows, model.norm_);
  const auto [delta, rew] = adm_targets<float>(windows, model.norm_);
  const Tensor<float> so = mem.state_head.apply(x);
  const Tensor<float> ro = mem.reward_head.apply(x);
  const int64_t ds = model.state_dim_;
  const float lo = static_cast<float>(model.cfg_.logstd_min);
  const float hi = static_cast<float>(model.cfg_.logstd_max);
  constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
  double total = 0;
  for (int64_t i = 0; i < static_cast<int64_t>(windows.size()); ++i) {
    for (int64_t j = 0; j < ds; ++j) {
      const double mu = so.data[i * 2 * ds + j];
      const double ls = soft_clamp_raw(so.data[i * 2 * ds + ds + j], lo, hi);
      const double d = delta.data[i * ds + j] - mu;
      total += 0.5 * kLog2Pi + ls + 0.5 * d * d * std::exp(-2 * ls);
    }
    const double mu_r = ro.data[i * 2];
    const double ls_r = soft_clamp_raw(ro.data[i * 2 + 1], lo, hi);
    const double dr = rew.data[i] - mu_r;
    total += 0.5 * kLog2Pi + ls_r + 0.5 * dr * dr * std::exp(-2 * ls_r);
  }
  return total / static_cast<double>(windows.size());
}

TrainReport EnsembleModel::train(const ReplayBuffer& data, uint64_t seed) {
  norm_ = Normalizer::fit(data);
  const auto [train_mask, holdout_mask] = split_episodes(data.num_episodes(),
                                                         cfg_.holdout_fraction, seed);
  const int64_t batches_per_epoch =
      std::max<int64_t>(1, static_cast<int64_t>(data.size()) / cfg_.batch);
  TrainReport report;

  for (int64_t mi = 0; mi < cfg_.members; ++mi) {
    Member& mem = members_[static_cast<size_t>(mi)];
    Adam<float> opt(static_cast<float>(cfg_.lr));
    Rng batch_rng = Rng::derive(seed, {streams::kBatch, static_cast<uint64_t>(mi)});

    MemberNets nets{&mem.state_head, &mem.reward_head};
    BestTracker<MemberNets> best(nets);

    auto holdout = data.enumerate_sequences(1, cfg_.holdout_windows, &holdout_mask);
    for (int64_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
      for (int64_t b = 0; b < batches_per_epoch; ++b) {
        auto batch = data.sample_sequences(cfg_.batch, 1, KPolicy::kFixed, batch_rng, &train_mask);
        const auto x = ensemble_inputs(batch, norm_);
        const auto [delta, rew] = adm_targets<float>(batch, norm_);

        Tape<float> tape;
        Binder<float> binder(tape);
        auto sb = mem.state_head.bind(binder);
        auto rb = mem.reward_head.bind(binder);
        auto xc = tape.constant(x);
        auto so = sb.apply(tape, xc);
        auto ro = rb.apply(tape, xc);
        auto mu_s = tape.slice_cols(so, 0, state_dim_);
        auto raw_ls_s = tape.slice_cols(so, state_dim_, 2 * state_dim_);
        auto ls_s = soft_clamp(tape, raw_ls_s, static_cast<float>(cfg_.logstd_min),
                               static_cast<float>(cfg_.logstd_max));
        auto mu_r = tape.slice_cols(ro, 0, 1);
        auto raw_ls_r = tape.slice_cols(ro, 1, 2);
        auto ls_r = soft_clamp(tape, raw_ls_r, static_cast<float>(cfg_.logstd_min),
                               static_cast<float>(cfg_.logstd_max));
        auto nll = tape.add(tape.reduce_sum(tape.gaussian_nll(mu_s, ls_s, delta)),
                            tape.reduce_sum(tape.gaussian_nll(mu_r, ls_r, rew)));
        auto reg = tape.add(
            tape.add(tape.reduce_sum(tape.softplus(tape.add_scalar(raw_ls_s, -static_cast<float>(cfg_.logstd_max)))),
                     tape.reduce_sum(tape.softplus(tape.add_scalar(tape.scale(raw_ls_s, -1.0f), static_cast<float>(cfg_.logstd_min))))),
            tape.add(tape.reduce_sum(tape.softplus(tape.add_scalar(raw_ls_r, -static_cast<float>(cfg_.logstd_max)))),
                     tape.reduce_sum(tape.softplus(tape.add_scalar(tape.scale(raw_ls_r, -1.0f), static_cast<float>(cfg_.logstd_min))))));
        const float inv_b = 1.0f / static_cast<float>(cfg_.batch);
        auto loss = tape.add(tape.scale(nll, inv_b),
                             tape.scale(reg, static_cast<float>(cfg_.bound_reg_weight) * inv_b));
        tape.backward(loss);

        std::vector<Tensor<float>*> params;
        std::vector<const Tensor<float>*> grads;
        for (size_t i = 0; i < binder.size(); ++i) {
          params.push_back(binder.param(i));
          grads.push_back(&binder.grad(i));
        }
        opt.step(params, grads);
        ++report.grad_steps;
      }
      ++report.epochs;
      best.observe(ensemble_member_holdout_nll(*this, mi, holdout));
      if (best.epochs_since_best() >= cfg_.patience) break;
    }
    best.restore();
  }

  // elite ranking by holdout NLL
  auto holdout = data.enumerate_sequences(1, cfg_.holdout_windows, &holdout_mask);
  rank_elites(holdout);
  report.best_holdout_nll = ensemble_member_holdout_nll(*this, elites_.front(), holdout);
  for (int64_t mi = 0; mi < cfg_.members; ++mi)
    report.holdout_nll_per_k.push_back(ensemble_member_holdout_nll(*this, mi, holdout));
  return report;
}

void EnsembleModel::rank_elites(const std::vector<SequenceSample>& windows) {
  std::vector<std::pair<double, int64_t>> scored;
  for (int64_t mi = 0; mi < cfg_.members; ++mi)
    scored.emplace_back(ensemble_member_holdout_nll(*this, mi, windows), mi);
  std::stable_sort(scored.begin(), scored.end());
  elites_.clear();
  for (int64_t i = 0; i < cfg_.elites; ++i) elites_.push_back(scored[static_cast<size_t>(i)].second);
}

GaussianPrediction EnsembleModel::predict(const std::vector<float>& s, const std::vector<float>& a,
                                          Rng& rng) const {
  const int64_t pick = rng.uniform_int(0, static_cast<int64_t>(elites_.size()) - 1);
  return predict_member(s, a, elites_[static_cast<size_t>(pick)]);
}

GaussianPrediction EnsembleModel::predict_member(const std::vector<float>& s,
                                                 const std::vector<float>& a,
                                                 int64_t member) const {
  const Member& mem = members_.at(static_cast<size_t>(member));
  const auto ns = norm_.norm_state(s);
  const auto na = norm_.norm_action(a);
  Tensor<float> x = Tensor<float>::zeros({1, state_dim_ + action_dim_});
  for (int64_t j = 0; j < state_dim_; ++j) x.data[j] = ns[static_cast<size_t>(j)];
  for (int64_t j = 0; j < action_dim_; ++j) x.data[state_dim_ + j] = na[static_cast<size_t>(j)];
  const Tensor<float> so = mem.state_head.apply(x);
  const Tensor<float> ro = mem.reward_head.apply(x);
  const float lo = static_cast<float>(cfg_.logstd_min), hi = static_cast<float>(cfg_.logstd_max);
  GaussianPrediction p;
  p.mean_s.resize(static_cast<size_t>(state_dim_));
  p.std_s.resize(static_cast<size_t>(state_dim_));
  for (int64_t j = 0; j < state_dim_; ++j) {
    p.mean_s[j] = s[j] + so.data[j] * norm_.s_std[j];
    p.std_s[j] = std::exp(soft_clamp_raw(so.data[state_dim_ + j], lo, hi)) * norm_.s_std[j];
  }
  p.mean_r = norm_.r_mean + ro.data[0] * norm_.r_std;
  p.std_r = std::exp(soft_clamp_raw(ro.data[1], lo, hi)) * norm_.r_std;
  return p;
}

// ---------------- bootstrapping RNN baseline ----------------

BootstrapRnnModel::BootstrapRnnModel(const AdmConfig& cfg, int64_t state_dim, int64_t action_dim,
                                     uint64_t init_seed)
    : cfg_(cfg), state_dim_(state_dim), action_dim_(action_dim),
      norm_(Normalizer::identity(state_dim, action_dim)),
      opt_(static_cast<float>(cfg.lr)) {
  cfg_.validate();
  Rng rng = Rng::derive(init_seed, {streams::kInit});
  net_ = AdmNet<float>::init(state_dim, action_dim, cfg_.gru_hidden, cfg_.head_hidden,
                             cfg_.head_layers, static_cast<float>(cfg_.logstd_min),
                             static_cast<float>(cfg_.logstd_max), rng);
}

namespace {

std::vector<Tensor<float>> pair_window_inputs(const std::vector<PairWindow>& group,
                                              const Normalizer& norm) {
  const int64_t b = static_cast<int64_t>(group.size());
  const int64_t w = static_cast<int64_t>(group.front().states.size());
  const int64_t ds = static_cast<int64_t>(group.front().states.front().size());
  const int64_t da = static_cast<int64_t>(group.front().actions.front().size());
  std::vector<Tensor<float>> xs;
  for (int64_t step = 0; step < w; ++step) {
    Tensor<float> x = Tensor<float>::zeros({b, ds + da});
    for (int64_t i = 0; i < b; ++i) {
      const auto ns = norm.norm_state(group[static_cast<size_t>(i)].states[static_cast<size_t>(step)]);
      const auto na = norm.norm_action(group[static_cast<size_t>(i)].actions[static_cast<size_t>(step)]);
      for (int64_t j = 0; j < ds; ++j) x.data[i * (ds + da) + j] = ns[static_cast<size_t>(j)];
      for (int64_t j = 0; j < da; ++j) x.data[i * (ds + da) + ds + j] = na[static_cast<size_t>(j)];
    }
    xs.push_back(std::move(x));
  }
  return xs;
}

// One-step targets: delta from the window's last state.
std::pair<Tensor<float>, Tensor<float>> pair_window_targets(const std::vector<PairWindow>& group,
                                                            const Normalizer& norm) {
  const int64_t b = static_cast<int64_t>(group.size());
  const int64_t ds = static_cast<int64_t>(group.front().states.front().size());
  Tensor<float> delta = Tensor<float>::zeros({b, ds});
  Tensor<float> rew = Tensor<float>::zeros({b, 1});
  for (int64_t i = 0; i < b; ++i) {
    const auto& w = group[static_cast<size_t>(i)];
    for (int64_t j = 0; j < ds; ++j)
      delta.data[i * ds + j] = (w.s_end[static_cast<size_t>(j)] - w.states.back()[static_cast<size_t>(j)]) /
                               norm.s_std[static_cast<size_t>(j)];
    rew.data[i] = (w.r_end - norm.r_mean) / norm.r_std;
  }
  return {delta, rew};
}

}  // namespace

TrainReport BootstrapRnnModel::train(const ReplayBuffer& data, uint64_t seed) {
  norm_ = Normalizer::fit(data);
  const auto [train_mask, holdout_mask] = split_episodes(data.num_episodes(),
                                                         cfg_.holdout_fraction, seed);
  const int64_t batches_per_epoch =
      std::max<int64_t>(1, static_cast<int64_t>(data.size()) / cfg_.batch);
  Rng batch_rng = Rng::derive(seed, {streams::kBatch});
  BestTracker<AdmNet<float>> best(net_);
  TrainReport report;

  auto holdout = data.enumerate_pair_windows(cfg_.m, cfg_.holdout_windows_per_k, &holdout_mask);
  auto holdout_nll = [&]() {
    const auto xs = pair_window_inputs(holdout, norm_);
    const auto [delta, rew] = pair_window_targets(holdout, norm_);
    const auto out = net_.forward(xs);
    double total = 0;
    for (int64_t i = 0; i < static_cast<int64_t>(holdout.size()); ++i)
      total += sample_raw_nll(out, delta, rew, i);
    return total / static_cast<double>(holdout.size());
  };

  for (int64_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
    double epoch_loss = 0;
    for (int64_t b = 0; b < batches_per_epoch; ++b) {
      auto batch = data.sample_pair_windows(cfg_.batch, cfg_.m, batch_rng, &train_mask);
      const auto xs_t = pair_window_inputs(batch, norm_);
      const auto [delta, rew] = pair_window_targets(batch, norm_);

      Tape<float> tape;
      Binder<float> binder(tape);
      const auto bound = net_.bind(binder);
      std::vector<Tape<float>::Id> xs;
      for (const auto& x : xs_t) xs.push_back(tape.constant(x));
      const auto out = net_.forward_graph(tape, bound, xs);
      auto nll = tape.add(tape.reduce_sum(tape.gaussian_nll(out.mu_s, out.logstd_s, delta)),
                          tape.reduce_sum(tape.gaussian_nll(out.mu_r, out.logstd_r, rew)));
      auto reg = tape.add(
          tape.add(tape.reduce_sum(tape.softplus(tape.add_scalar(out.raw_logstd_s, -static_cast<float>(cfg_.logstd_max)))),
                   tape.reduce_sum(tape.softplus(tape.add_scalar(tape.scale(out.raw_logstd_s, -1.0f), static_cast<float>(cfg_.logstd_min))))),
          tape.add(tape.reduce_sum(tape.softplus(tape.add_scalar(out.raw_logstd_r, -static_cast<float>(cfg_.logstd_max)))),
                   tape.reduce_sum(tape.softplus(tape.add_scalar(tape.scale(out.raw_logstd_r, -1.0f), static_cast<float>(cfg_.logstd_min))))));
      const float inv_b = 1.0f / static_cast<float>(cfg_.batch);
      auto loss = tape.add(tape.scale(nll, inv_b),
                           tape.scale(reg, static_cast<float>(cfg_.bound_reg_weight) * inv_b));
      tape.backward(loss);
      epoch_loss += tape.value(loss).data[0];

      std::vector<Tensor<float>*> params;
      std::vector<const Tensor<float>*> grads;
      for (size_t i = 0; i < binder.size(); ++i) {
        params.push_back(binder.param(i));
        grads.push_back(&binder.grad(i));
      }
      opt_.step(params, grads);
      ++report.grad_steps;
    }
    report.epoch_train_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
    ++report.epochs;
    const double score = holdout_nll();
    if (best.observe(score)) report.best_holdout_nll = score;
    if (best.epochs_since_best() >= cfg_.patience) break;
  }
  best.restore();
  return report;
}

GaussianPrediction BootstrapRnnModel::predict(const std::vector<std::vector<float>>& states,
                                              const std::vector<std::vector<float>>& actions) const {
  if (static_cast<int64_t>(states.size()) != cfg_.m ||
      static_cast<int64_t>(actions.size()) != cfg_.m)
    throw UsageError("bootstrap-rnn predict: expected exactly " + std::to_string(cfg_.m) +
                     " (state, action) pairs");
  std::vector<PairWindow> group(1);
  group[0].states = states;
  group[0].actions = actions;
  group[0].s_end = states.back();  // unused by inputs
  const auto xs = pair_window_inputs(group, norm_);
  const auto out = net_.forward(xs);

  GaussianPrediction p;
  p.mean_s.resize(static_cast<size_t>(state_dim_));
  p.std_s.resize(static_cast<size_t>(state_dim_));
  for (int64_t j = 0; j < state_dim_; ++j) {
    p.mean_s[j] = states.back()[static_cast<size_t>(j)] + out.mu_s.data[j] * norm_.s_std[j];
    p.std_s[j] = std::exp(out.logstd_s.data[j]) * norm_.s_std[j];
  }
  p.mean_r = norm_.r_mean + out.mu_r.data[0] * norm_.r_std;
  p.std_r = std::exp(out.logstd_r.data[0]) * norm_.r_std;
  return p;
}

}  // namespace admpo
