#pragma once

#include <memory>
#include <string>
#include <vector>

#include "admpo/rng.hpp"

namespace admpo {

struct EnvSpec {
  std::string name;
  int64_t state_dim = 0;
  int64_t action_dim = 0;  // actions bounded in [-1, 1] per dimension
  int64_t max_episode_steps = 0;
  bool has_termination = false;
  std::string reward_desc;
};

struct EnvState {
  std::vector<float> s;
  int64_t step = 0;
};

struct StepResult {
  EnvState next;
  float reward = 0;
  bool done = false;            // terminal(next) || step limit reached
  bool action_clamped = false;  // input action fell outside [-1, 1]
};

// Deterministic toy environments. Dynamics are computed in double and the
// stored state is quantized to float32 each step, so any recorded state
// vector replays bit-exactly through step(). All randomness enters through
// reset(); step() is a pure function of (state, action).
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;

  // Deterministic map from reset noise (one uniform draw in [-1, 1] per
  // noise dimension) to an initial state; zero noise gives the distribution
  // center. reset() draws the noise from the stream and delegates here.
  virtual EnvState init_from_noise(const std::vector<double>& noise) const = 0;
  virtual int64_t reset_noise_dim() const = 0;

  EnvState reset(Rng& rng) const;

  virtual StepResult step(const EnvState& state, const std::vector<float>& action) const = 0;

  // Termination predicate on a raw state vector (no step counter), reusable
  // on model-predicted states.
  virtual bool terminal(const std::vector<float>& s) const = 0;

  // Ground-truth k-step dynamics: step() composed k times, rewards
  // discarded, termination and step limits ignored.
  std::vector<float> true_k_step(const std::vector<float>& s,
                                 const std::vector<std::vector<float>>& actions) const;
};

std::unique_ptr<Env> make_env(const std::string& name);

// Adds N(0, std) observation noise; used by aleatoric-uncertainty tests.
// Base environments stay deterministic.
std::vector<float> add_obs_noise(const std::vector<float>& s, double std, Rng& rng);

}  // namespace admpo
