#include "admpo/sac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "admpo/checkpoint.hpp"
#include "admpo/errors.hpp"
#include "admpo/tape.hpp"

namespace admpo {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
constexpr double kLn2 = 0.6931471805599453094172321214581766;
}  // namespace

void SacConfig::validate() const {
  if (tau <= 0 || tau > 1) throw ConfigError("sac.tau must be in (0, 1]");
  if (gamma <= 0 || gamma >= 1) throw ConfigError("sac.gamma must be in (0, 1)");
  if (real_fraction <= 0 || real_fraction > 1)
    throw ConfigError("sac.real_fraction must be in (0, 1]");
  if (batch < 1) throw ConfigError("sac.batch must be >= 1");
  if (init_alpha < 0) throw ConfigError("sac.init_alpha must be >= 0");
  if (actor_logstd_min >= actor_logstd_max)
    throw ConfigError("sac.actor_logstd_min must be below sac.actor_logstd_max");
}

SacAgent::SacAgent(const SacConfig& cfg, int64_t obs_dim, int64_t act_dim, uint64_t init_seed)
    : cfg_(cfg),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      target_entropy_(cfg.target_entropy != 0 ? cfg.target_entropy
                                              : -static_cast<double>(act_dim)),
      opt_actor_(static_cast<float>(cfg.lr_actor)),
      opt_q1_(static_cast<float>(cfg.lr_critic)),
      opt_q2_(static_cast<float>(cfg.lr_critic)),
      opt_alpha_(static_cast<float>(cfg.lr_alpha)) {
  cfg_.validate();
  std::vector<int64_t> hidden(static_cast<size_t>(cfg.layers), cfg.hidden);
  Rng rng = Rng::derive(init_seed, {streams::kInit});
  nets_.actor = Mlp<float>::init(obs_dim, hidden, 2 * act_dim, rng);
  nets_.q1 = Mlp<float>::init(obs_dim + act_dim, hidden, 1, rng);
  nets_.q2 = Mlp<float>::init(obs_dim + act_dim, hidden, 1, rng);
  nets_.q1t = nets_.q1;
  nets_.q2t = nets_.q2;
  // alpha is optimized in log space
  nets_.log_alpha = Tensor<float>::scalar(
      cfg.init_alpha > 0 ? std::log(static_cast<float>(cfg.init_alpha)) : -40.0f);
}

double SacAgent::alpha() const {
  if (!cfg_.auto_alpha && cfg_.init_alpha == 0) return 0;
  return std::exp(static_cast<double>(nets_.log_alpha.data[0]));
}

SacAgent::ActorOut SacAgent::actor_forward(const std::vector<float>& s) const {
  for (float v : s)
    if (!std::isfinite(v)) throw UsageError("sac act: non-finite state");
  Tensor<float> x = Tensor<float>::row(s);
  Tensor<float> out = nets_.actor.apply(x);
  ActorOut o;
  o.mu.resize(static_cast<size_t>(act_dim_));
  o.logstd.resize(static_cast<size_t>(act_dim_));
  for (int64_t j = 0; j < act_dim_; ++j) {
    o.mu[j] = out.data[j];
    o.logstd[j] = soft_clamp_raw(out.data[act_dim_ + j],
                                 static_cast<float>(cfg_.actor_logstd_min),
                                 static_cast<float>(cfg_.actor_logstd_max));
  }
  return o;
}

std::vector<float> SacAgent::act(const std::vector<float>& s, ActMode mode, Rng& rng) const {
  const ActorOut o = actor_forward(s);
  std::vector<float> a(static_cast<size_t>(act_dim_));
  for (int64_t j = 0; j < act_dim_; ++j) {
    const double u = (mode == ActMode::kMean)
                         ? static_cast<double>(o.mu[j])
                         : o.mu[j] + std::exp(static_cast<double>(o.logstd[j])) * rng.normal();
    a[j] = static_cast<float>(std::tanh(u));
  }
  return a;
}

namespace {

// log pi contribution of one dimension given pre-squash u.
double logp_dim(double u, double mu, double logstd) {
  const double sigma = std::exp(logstd);
  const double eps = (u - mu) / sigma;
  const double normal = -0.5 * eps * eps - logstd - 0.5 * kLog2Pi;
  const double tanh_corr = 2.0 * (kLn2 - u - kernels::softplus(-2.0 * u));
  return normal - tanh_corr;
}

}  // namespace

std::pair<std::vector<float>, double> SacAgent::act_logprob(const std::vector<float>& s,
                                                            Rng& rng) const {
  const ActorOut o = actor_forward(s);
  std::vector<float> a(static_cast<size_t>(act_dim_));
  double logp = 0;
  for (int64_t j = 0; j < act_dim_; ++j) {
    const double sigma = std::exp(static_cast<double>(o.logstd[j]));
    const double u = o.mu[j] + sigma * rng.normal();
    a[j] = static_cast<float>(std::tanh(u));
    logp += logp_dim(u, o.mu[j], o.logstd[j]);
  }
  return {a, logp};
}

double SacAgent::log_prob(const std::vector<float>& s, const std::vector<float>& a) const {
  const ActorOut o = actor_forward(s);
  double logp = 0;
  for (int64_t j = 0; j < act_dim_; ++j) {
    const double clipped = std::min(std::max(static_cast<double>(a[j]), -0.999999), 0.999999);
    const double u = std::atanh(clipped);
    logp += logp_dim(u, o.mu[j], o.logstd[j]);
  }
  return logp;
}

double SacAgent::min_q(const std::vector<float>& s, const std::vector<float>& a) const {
  std::vector<float> x = s;
  x.insert(x.end(), a.begin(), a.end());
  Tensor<float> in = Tensor<float>::row(x);
  const float q1 = nets_.q1.apply(in).data[0];
  const float q2 = nets_.q2.apply(in).data[0];
  return std::min(q1, q2);
}

std::vector<float> SacAgent::critic_targets(const std::vector<Transition>& batch,
                                            Rng& rng) const {
  const double a = alpha();
  std::vector<float> y(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    if (t.done) {
      y[i] = t.r;
      continue;
    }
    auto [a2, logp2] = act_logprob(t.s_next, rng);
    std::vector<float> x = t.s_next;
    x.insert(x.end(), a2.begin(), a2.end());
    Tensor<float> in = Tensor<float>::row(x);
    const double q1t = nets_.q1t.apply(in).data[0];
    const double q2t = nets_.q2t.apply(in).data[0];
    y[i] = static_cast<float>(t.r + cfg_.gamma * (std::min(q1t, q2t) - a * logp2));
  }
  return y;
}

SacLosses SacAgent::update(const std::vector<Transition>& batch, Rng& rng) {
  if (batch.empty()) throw UsageError("sac update: empty batch");
  const int64_t b = static_cast<int64_t>(batch.size());
  SacLosses losses;

  // batch tensors
  Tensor<float> s = Tensor<float>::zeros({b, obs_dim_});
  Tensor<float> a = Tensor<float>::zeros({b, act_dim_});
  for (int64_t i = 0; i < b; ++i) {
    const Transition& t = batch[static_cast<size_t>(i)];
    for (int64_t j = 0; j < obs_dim_; ++j) s.data[i * obs_dim_ + j] = t.s[static_cast<size_t>(j)];
    for (int64_t j = 0; j < act_dim_; ++j) a.data[i * act_dim_ + j] = t.a[static_cast<size_t>(j)];
  }

  const std::vector<float> y = critic_targets(batch, rng);
  Tensor<float> yt = Tensor<float>::zeros({b, 1});
  for (int64_t i = 0; i < b; ++i) yt.data[i] = y[static_cast<size_t>(i)];
  if (!yt.all_finite()) throw TrainingError("sac update: non-finite critic target");

  // critic updates
  auto critic_step = [&](Mlp<float>& q, Adam<float>& opt) {
    Tape<float> tape;
    Binder<float> binder(tape);
    auto qb = q.bind(binder);
    auto sa = tape.constant(Tensor<float>(s));
    auto aa = tape.constant(Tensor<float>(a));
    auto qv = qb.apply(tape, tape.concat_cols(sa, aa));
    auto loss = tape.reduce_mean(tape.square(tape.sub(qv, tape.constant(Tensor<float>(yt)))));
    tape.backward(loss);
    std::vector<Tensor<float>*> params;
    std::vector<const Tensor<float>*> grads;
    for (size_t i = 0; i < binder.size(); ++i) {
      params.push_back(binder.param(i));
      grads.push_back(&binder.grad(i));
    }
    opt.step(params, grads);
    return static_cast<double>(tape.value(loss).data[0]);
  };
  losses.critic1 = critic_step(nets_.q1, opt_q1_);
  losses.critic2 = critic_step(nets_.q2, opt_q2_);

  // actor update (critic parameters receive gradients here but are not stepped)
  double mean_logp;
  {
    Tape<float> tape;
    Binder<float> binder(tape);
    auto ab = nets_.actor.bind(binder);
    const size_t actor_params = binder.size();
    auto q1b = nets_.q1.bind(binder);
    auto q2b = nets_.q2.bind(binder);

    auto sc = tape.constant(Tensor<float>(s));
    auto out = ab.apply(tape, sc);
    auto mu = tape.slice_cols(out, 0, act_dim_);
    auto ls = soft_clamp(tape, tape.slice_cols(out, act_dim_, 2 * act_dim_),
                         static_cast<float>(cfg_.actor_logstd_min),
                         static_cast<float>(cfg_.actor_logstd_max));
    Tensor<float> eps = Tensor<float>::zeros({b, act_dim_});
    for (auto& v : eps.data) v = static_cast<float>(rng.normal());
    auto u = tape.add(mu, tape.mul(tape.exp(ls), tape.constant(Tensor<float>(eps))));
    auto act = tape.tanh(u);

    // log pi = sum_d [-0.5 eps^2 - logstd - 0.5 log(2pi)] - log(1 - tanh(u)^2)
    // and -log(1 - tanh(u)^2) = 2*(u + softplus(-2u) - ln2) per dimension
    Tensor<float> normal_const = Tensor<float>::zeros({b, act_dim_});
    for (int64_t i = 0; i < b * act_dim_; ++i)
      normal_const.data[i] = -0.5f * eps.data[i] * eps.data[i] - 0.5f * static_cast<float>(kLog2Pi);
    auto normal_part = tape.row_sum(tape.sub(tape.constant(std::move(normal_const)), ls));
    auto corr = tape.row_sum(
        tape.scale(tape.add_scalar(tape.add(u, tape.softplus(tape.scale(u, -2.0f))),
                                   -static_cast<float>(kLn2)),
                   2.0f));
    auto logp = tape.add(normal_part, corr);

    auto qmin = tape.min_elem(q1b.apply(tape, tape.concat_cols(sc, act)),
                              q2b.apply(tape, tape.concat_cols(sc, act)));
    const float af = static_cast<float>(alpha());
    auto loss = tape.reduce_mean(tape.sub(tape.scale(logp, af), qmin));
    tape.backward(loss);
    losses.actor = tape.value(loss).data[0];

    double lp = 0;
    for (int64_t i = 0; i < b; ++i) lp += tape.value(logp).data[i];
    mean_logp = lp / static_cast<double>(b);
    losses.entropy = -mean_logp;

    std::vector<Tensor<float>*> params;
    std::vector<const Tensor<float>*> grads;
    for (size_t i = 0; i < actor_params; ++i) {
      params.push_back(binder.param(i));
      grads.push_back(&binder.grad(i));
    }
    opt_actor_.step(params, grads);
  }

  // temperature update toward the target entropy
  if (cfg_.auto_alpha) {
    // d/dlog_alpha of -log_alpha * (logp + target_entropy) averaged over batch
    Tensor<float> grad = Tensor<float>::scalar(
        -static_cast<float>(mean_logp + target_entropy_));
    losses.alpha = -static_cast<double>(nets_.log_alpha.data[0]) * (mean_logp + target_entropy_);
    opt_alpha_.step({&nets_.log_alpha}, {&grad});
  }

  // Polyak target update
  polyak_update<float>(nets_.q1t, nets_.q1, static_cast<float>(cfg_.tau));
  polyak_update<float>(nets_.q2t, nets_.q2, static_cast<float>(cfg_.tau));
  return losses;
}

double SacAgent::target_distance() const {
  double d = 0;
  std::vector<Tensor<float>*> on, tg;
  const_cast<Nets&>(nets_).q1.visit("", [&](const std::string&, Tensor<float>& p) { on.push_back(&p); });
  const_cast<Nets&>(nets_).q1t.visit("", [&](const std::string&, Tensor<float>& p) { tg.push_back(&p); });
  const_cast<Nets&>(nets_).q2.visit("", [&](const std::string&, Tensor<float>& p) { on.push_back(&p); });
  const_cast<Nets&>(nets_).q2t.visit("", [&](const std::string&, Tensor<float>& p) { tg.push_back(&p); });
  for (size_t i = 0; i < on.size(); ++i)
    for (int64_t j = 0; j < on[i]->size(); ++j) {
      const double diff = on[i]->data[j] - tg[i]->data[j];
      d += diff * diff;
    }
  return std::sqrt(d);
}

void SacAgent::save(const std::string& prefix) const {
  auto* self = const_cast<SacAgent*>(this);
  save_checkpoint(prefix + ".admp", collect_params(self->nets_, "sac"));
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "sac";
  j["obs_dim"] = obs_dim_;
  j["act_dim"] = act_dim_;
  j["hidden"] = cfg_.hidden;
  j["layers"] = cfg_.layers;
  j["target_entropy"] = target_entropy_;
  j["actor_logstd_min"] = cfg_.actor_logstd_min;
  j["actor_logstd_max"] = cfg_.actor_logstd_max;
  std::ofstream out(prefix + ".json", std::ios::trunc);
  if (!out) throw IoError("sac save: cannot open '" + prefix + ".json'");
  out << j.dump(2) << "\n";
}

SacAgent SacAgent::load(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw IoError("sac load: cannot open '" + prefix + ".json'");
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("kind", "") != "sac") throw IoError("sac load: '" + prefix + "' is not a sac checkpoint");
  SacConfig cfg;
  cfg.hidden = j.at("hidden").get<int64_t>();
  cfg.layers = j.at("layers").get<int64_t>();
  cfg.target_entropy = j.at("target_entropy").get<double>();
  cfg.actor_logstd_min = j.at("actor_logstd_min").get<double>();
  cfg.actor_logstd_max = j.at("actor_logstd_max").get<double>();
  SacAgent agent(cfg, j.at("obs_dim").get<int64_t>(), j.at("act_dim").get<int64_t>(), 0);
  restore_params(agent.nets_, "sac", load_checkpoint(prefix + ".admp"));
  return agent;
}

std::vector<float> AgentPolicy::act(const std::vector<float>& s, Rng& rng) const {
  std::vector<float> a = agent_->act(s, mode_, rng);
  if (noise_ > 0) {
    for (auto& v : a)
      v = static_cast<float>(
          std::min(std::max(v + noise_ * rng.normal(), -1.0), 1.0));
  }
  return a;
}

std::unique_ptr<Policy> make_behavior_policy(const std::string& spec, const EnvSpec& env_spec) {
  if (spec == "random") return std::make_unique<RandomPolicy>(env_spec.action_dim);

  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    size_t pos = 0;
    while (pos <= s.size()) {
      const size_t next = s.find(':', pos);
      if (next == std::string::npos) {
        parts.push_back(s.substr(pos));
        break;
      }
      parts.push_back(s.substr(pos, next - pos));
      pos = next + 1;
    }
    return parts;
  };
  const auto parts = split(spec);

  auto load_agent = [&](const std::string& prefix) {
    auto agent = std::make_shared<SacAgent>(SacAgent::load(prefix));
    if (agent->obs_dim() != env_spec.state_dim || agent->act_dim() != env_spec.action_dim)
      throw ConfigError("behavior policy: checkpoint dims (" + std::to_string(agent->obs_dim()) +
                        ", " + std::to_string(agent->act_dim()) + ") incompatible with env '" +
                        env_spec.name + "'");
    return agent;
  };

  if (parts.size() == 3 && parts[0] == "sac") {
    const double sigma = std::stod(parts[2]);
    return std::make_unique<AgentPolicy>(load_agent(parts[1]), SacAgent::ActMode::kMean, sigma);
  }
  if (parts.size() == 4 && parts[0] == "mix") {
    const double sigma = std::stod(parts[2]);
    const double p = std::stod(parts[3]);
    if (p < 0 || p > 1) throw ConfigError("behavior policy: mix fraction must be in [0, 1]");

    class MixPolicy final : public Policy {
     public:
      MixPolicy(std::shared_ptr<const SacAgent> agent, double sigma, double p, int64_t act_dim)
          : agent_(std::move(agent), SacAgent::ActMode::kMean, sigma), random_(act_dim), p_(p) {}
      std::vector<float> act(const std::vector<float>& s, Rng& rng) const override {
        return rng.uniform() < p_ ? agent_.act(s, rng) : random_.act(s, rng);
      }

     private:
      AgentPolicy agent_;
      RandomPolicy random_;
      double p_;
    };
    return std::make_unique<MixPolicy>(load_agent(parts[1]), sigma, p, env_spec.action_dim);
  }
  throw ConfigError("behavior policy: unknown spec '" + spec +
                    "' (expected random, sac:PREFIX:STD, or mix:PREFIX:STD:P)");
}

}  // namespace admpo
