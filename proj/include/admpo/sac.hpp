#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "admpo/data.hpp"
#include "admpo/env.hpp"
#include "admpo/nn.hpp"
#include "admpo/optim.hpp"
#include "admpo/policy.hpp"
#include "admpo/rng.hpp"

namespace admpo {

struct SacConfig {
  int64_t hidden = 256;
  int64_t layers = 2;
  double tau = 5e-3;
  double gamma = 0.99;
  double lr_actor = 1e-4;
  double lr_critic = 3e-4;
  double lr_alpha = 3e-4;
  int64_t batch = 256;
  double target_entropy = 0;  // 0 resolves to -action_dim
  double real_fraction = 0.05;
  bool auto_alpha = true;
  double init_alpha = 1.0;
  double actor_logstd_min = -5.0;
  double actor_logstd_max = 2.0;

  void validate() const;
};

struct SacLosses {
  double critic1 = 0;
  double critic2 = 0;
  double actor = 0;
  double alpha = 0;
  double entropy = 0;  // mean of -log pi over the batch
};

// Twin-critic soft actor-critic with a squashed-Gaussian policy, automatic
// entropy temperature, and Polyak-averaged target critics.
class SacAgent {
 public:
  SacAgent(const SacConfig& cfg, int64_t obs_dim, int64_t act_dim, uint64_t init_seed);

  const SacConfig& config() const { return cfg_; }
  int64_t obs_dim() const { return obs_dim_; }
  int64_t act_dim() const { return act_dim_; }
  double alpha() const;
  double target_entropy() const { return target_entropy_; }

  enum class ActMode { kSample, kMean };

  std::vector<float> act(const std::vector<float>& s, ActMode mode, Rng& rng) const;

  // Sampled action together with its log-density under the policy.
  std::pair<std::vector<float>, double> act_logprob(const std::vector<float>& s, Rng& rng) const;

  // Log-density of taking `a` in `s` (change-of-variables through tanh).
  double log_prob(const std::vector<float>& s, const std::vector<float>& a) const;

  // Critic regression targets y = r + gamma * (1-done) * (min Q_target - alpha*logpi).
  std::vector<float> critic_targets(const std::vector<Transition>& batch, Rng& rng) const;

  SacLosses update(const std::vector<Transition>& batch, Rng& rng);

  double min_q(const std::vector<float>& s, const std::vector<float>& a) const;

  void save(const std::string& prefix) const;  // prefix.admp + prefix.json
  static SacAgent load(const std::string& prefix);

  Mlp<float>& actor_net() { return nets_.actor; }
  const Mlp<float>& critic1() const { return nets_.q1; }
  const Mlp<float>& critic1_target() const { return nets_.q1t; }
  const Mlp<float>& critic2() const { return nets_.q2; }
  const Mlp<float>& critic2_target() const { return nets_.q2t; }

  // parameter distance between online critics and their targets (L2)
  double target_distance() const;

 private:
  struct Nets {
    Mlp<float> actor;  // obs -> 2*act_dim
    Mlp<float> q1, q2, q1t, q2t;
    Tensor<float> log_alpha;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
      actor.visit(prefix + ".actor", f);
      q1.visit(prefix + ".q1", f);
      q2.visit(prefix + ".q2", f);
      q1t.visit(prefix + ".q1t", f);
      q2t.visit(prefix + ".q2t", f);
      f(prefix + ".log_alpha", log_alpha);
    }
  };

  struct ActorOut {
    std::vector<float> mu, logstd;
  };
  ActorOut actor_forward(const std::vector<float>& s) const;

  SacConfig cfg_;
  int64_t obs_dim_, act_dim_;
  double target_entropy_;
  Nets nets_;
  Adam<float> opt_actor_, opt_q1_, opt_q2_, opt_alpha_;
};

// Policy views over an agent.
class AgentPolicy final : public Policy {
 public:
  AgentPolicy(std::shared_ptr<const SacAgent> agent, SacAgent::ActMode mode,
              double action_noise_std = 0.0)
      : agent_(std::move(agent)), mode_(mode), noise_(action_noise_std) {}

  std::vector<float> act(const std::vector<float>& s, Rng& rng) const override;

 private:
  std::shared_ptr<const SacAgent> agent_;
  SacAgent::ActMode mode_;
  double noise_;
};

// Behavior-policy spec parser for dataset generation:
//   "random"
//   "sac:<checkpoint prefix>:<noise std>"      mean actions + Gaussian noise
//   "mix:<checkpoint prefix>:<noise std>:<p>"  per-step blend: with
//                                              probability p act like the
//                                              sac spec, otherwise random
std::unique_ptr<Policy> make_behavior_policy(const std::string& spec, const EnvSpec& env_spec);

}  // namespace admpo
