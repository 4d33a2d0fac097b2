#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "admpo/env.hpp"
#include "admpo/policy.hpp"
#include "admpo/rng.hpp"

namespace admpo {

struct Transition {
  std::vector<float> s;
  std::vector<float> a;
  float r = 0;
  std::vector<float> s_next;
  bool done = false;  // environmental termination only, never the step limit
  uint32_t episode_id = 0;
};

// One Eq.-style training tuple: predict (r_end, s_end) from s_start and the
// k actions in between. All steps lie inside one episode.
struct SequenceSample {
  std::vector<float> s_start;
  std::vector<std::vector<float>> actions;  // k action vectors
  float r_end = 0;
  std::vector<float> s_end;
  int64_t k = 0;
};

// m states + (m-1) actions seeding a model roll-out.
struct RolloutStart {
  std::vector<std::vector<float>> states;
  std::vector<std::vector<float>> actions;
};

// w full (s, a) pairs plus the one-step-ahead target; consumed by models
// that condition on the whole state-action history.
struct PairWindow {
  std::vector<std::vector<float>> states;
  std::vector<std::vector<float>> actions;
  float r_end = 0;
  std::vector<float> s_end;
};

enum class KPolicy { kUniform, kFixed };

// Episode-structured storage for real transitions. Sequence windows never
// cross episode boundaries. When the capacity is exceeded, whole oldest
// episodes are evicted so the boundary invariants survive.
class ReplayBuffer {
 public:
  ReplayBuffer(int64_t state_dim, int64_t action_dim, size_t capacity = 1'000'000);

  int64_t state_dim() const { return state_dim_; }
  int64_t action_dim() const { return action_dim_; }
  size_t size() const { return transitions_.size(); }
  size_t num_episodes() const { return episodes_.size(); }

  // Appends a transition to the open episode, opening one if needed.
  // done = true closes the episode; call end_episode() for truncations.
  void add(std::vector<float> s, std::vector<float> a, float r, std::vector<float> s_next,
           bool done);
  void end_episode();

  const Transition& transition(size_t i) const { return transitions_[i]; }

  int64_t longest_episode() const;

  // Sampling. k is drawn uniformly from [1, m] per sample (KPolicy::kUniform)
  // or fixed to m (KPolicy::kFixed). episode_mask, when given, restricts
  // sampling to episodes with mask[i] != 0 (indexed by episode order).
  std::vector<SequenceSample> sample_sequences(int64_t batch, int64_t m, KPolicy k_policy,
                                               Rng& rng,
                                               const std::vector<uint8_t>* episode_mask = nullptr) const;

  // Deterministic evenly-strided enumeration of sequence windows of fixed k,
  // at most max_count of them; used for holdout evaluation.
  std::vector<SequenceSample> enumerate_sequences(int64_t k, int64_t max_count,
                                                  const std::vector<uint8_t>* episode_mask = nullptr) const;

  std::vector<RolloutStart> sample_rollout_starts(int64_t batch, int64_t m, Rng& rng) const;

  std::vector<PairWindow> sample_pair_windows(int64_t batch, int64_t w, Rng& rng,
                                              const std::vector<uint8_t>* episode_mask = nullptr) const;
  std::vector<PairWindow> enumerate_pair_windows(int64_t w, int64_t max_count,
                                                 const std::vector<uint8_t>* episode_mask = nullptr) const;

  // Plain single-transition batch for policy updates.
  std::vector<size_t> sample_indices(int64_t batch, Rng& rng) const;

 private:
  struct Episode {
    size_t start = 0;
    size_t len = 0;
    bool closed = false;
    bool terminal = false;  // closed by done=true
  };

  SequenceSample make_sequence(size_t tr_start, int64_t k) const;
  int64_t valid_starts(const Episode& e, int64_t k) const;
  int64_t valid_rollout_starts(const Episode& e, int64_t m) const;
  void evict_if_needed();

  int64_t state_dim_, action_dim_;
  size_t capacity_;
  std::vector<Transition> transitions_;
  std::vector<Episode> episodes_;
  uint32_t next_episode_id_ = 0;
  bool episode_open_ = false;
};

// FIFO ring buffer of model-generated single-step transitions. In offline
// mode the stored rewards are already penalized.
class ModelBuffer {
 public:
  explicit ModelBuffer(size_t capacity) : capacity_(capacity) {}
  size_t size() const { return items_.size(); }
  void add(Transition t);
  const Transition& at(size_t i) const;  // i = 0 is the oldest survivor
  std::vector<size_t> sample_indices(int64_t batch, Rng& rng) const;

 private:
  size_t capacity_;
  size_t head_ = 0;  // index of the oldest element once full
  std::vector<Transition> items_;
};

// Dataset file, little-endian binary:
//   header { magic "ADMD", version u32, state_dim u32, action_dim u32,
//            n_transitions u64 }
//   columnar arrays s, a, r, s_next (f32), done (u8), episode_id (u32)
//   u64 manifest_len + UTF-8 JSON manifest
constexpr uint32_t kDatasetVersion = 1;

void write_dataset(const std::string& path, const ReplayBuffer& buffer,
                   const nlohmann::ordered_json& manifest);

struct Dataset {
  ReplayBuffer buffer;
  nlohmann::ordered_json manifest;
};

Dataset read_dataset(const std::string& path);

// Rolls `episodes` episodes of `policy` in `env` and writes the dataset.
// Deterministic in (env, policy, episodes, seed). Returns the manifest.
nlohmann::ordered_json gen_dataset(const Env& env, const Policy& policy,
                                   const std::string& policy_spec, int64_t episodes,
                                   uint64_t seed, const std::string& path);

}  // namespace admpo
