#include "admpo/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "admpo/errors.hpp"

namespace admpo {

ReplayBuffer::ReplayBuffer(int64_t state_dim, int64_t action_dim, size_t capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {}

void ReplayBuffer::add(std::vector<float> s, std::vector<float> a, float r,
                       std::vector<float> s_next, bool done) {
  if (static_cast<int64_t>(s.size()) != state_dim_ ||
      static_cast<int64_t>(s_next.size()) != state_dim_)
    throw UsageError("replay: state dim mismatch");
  if (static_cast<int64_t>(a.size()) != action_dim_)
    throw UsageError("replay: action dim mismatch");
  if (!std::isfinite(r)) throw UsageError("replay: non-finite reward");

  if (!episode_open_) {
    episodes_.push_back(Episode{transitions_.size(), 0, false, false});
    episode_open_ = true;
  }
  Transition t;
  t.s = std::move(s);
  t.a = std::move(a);
  t.r = r;
  t.s_next = std::move(s_next);
  t.done = done;
  t.episode_id = next_episode_id_;
  transitions_.push_back(std::move(t));
  episodes_.back().len += 1;
  if (done) {
    episodes_.back().closed = true;
    episodes_.back().terminal = true;
    episode_open_ = false;
    ++next_episode_id_;
  }
  evict_if_needed();
}

void ReplayBuffer::end_episode() {
  if (!episode_open_) return;
  episodes_.back().closed = true;
  episode_open_ = false;
  ++next_episode_id_;
}

void ReplayBuffer::evict_if_needed() {
  if (transitions_.size() <= capacity_) return;
  // Drop whole oldest episodes until within capacity.
  size_t drop = 0;
  size_t eps = 0;
  while (transitions_.size() - drop > capacity_ && eps < episodes_.size()) {
    drop += episodes_[eps].len;
    ++eps;
  }
  transitions_.erase(transitions_.begin(), transitions_.begin() + static_cast<int64_t>(drop));
  episodes_.erase(episodes_.begin(), episodes_.begin() + static_cast<int64_t>(eps));
  for (auto& e : episodes_) e.start -= drop;
}

int64_t ReplayBuffer::longest_episode() const {
  int64_t best = 0;
  for (const auto& e : episodes_) best = std::max(best, static_cast<int64_t>(e.len));
  return best;
}

int64_t ReplayBuffer::valid_starts(const Episode& e, int64_t k) const {
  return std::max<int64_t>(0, static_cast<int64_t>(e.len) - k + 1);
}

SequenceSample ReplayBuffer::make_sequence(size_t tr_start, int64_t k) const {
  SequenceSample out;
  const Transition& first = transitions_[tr_start];
  out.s_start = first.s;
  out.k = k;
  for (int64_t i = 0; i < k; ++i) out.actions.push_back(transitions_[tr_start + i].a);
  const Transition& last = transitions_[tr_start + static_cast<size_t>(k) - 1];
  out.r_end = last.r;
  out.s_end = last.s_next;
  return out;
}

std::vector<SequenceSample> ReplayBuffer::sample_sequences(
    int64_t batch, int64_t m, KPolicy k_policy, Rng& rng,
    const std::vector<uint8_t>* episode_mask) const {
  if (m < 1) throw UsageError("sample_sequences: m must be >= 1");
  std::vector<SequenceSample> out;
  out.reserve(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    const int64_t k = (k_policy == KPolicy::kUniform) ? rng.uniform_int(1, m) : m;
    int64_t total = 0;
    for (size_t ei = 0; ei < episodes_.size(); ++ei) {
      if (episode_mask && !(*episode_mask)[ei]) continue;
      total += valid_starts(episodes_[ei], k);
    }
    if (total == 0)
      throw DataError("sample_sequences: no window of length k=" + std::to_string(k) +
                      "; longest episode has " + std::to_string(longest_episode()) +
                      " transitions");
    int64_t idx = rng.uniform_int(0, total - 1);
    for (size_t ei = 0; ei < episodes_.size(); ++ei) {
      if (episode_mask && !(*episode_mask)[ei]) continue;
      const int64_t v = valid_starts(episodes_[ei], k);
      if (idx < v) {
        out.push_back(make_sequence(episodes_[ei].start + static_cast<size_t>(idx), k));
        break;
      }
      idx -= v;
    }
  }
  return out;
}

std::vector<SequenceSample> ReplayBuffer::enumerate_sequences(
    int64_t k, int64_t max_count, const std::vector<uint8_t>* episode_mask) const {
  std::vector<size_t> starts;
  for (size_t ei = 0; ei < episodes_.size(); ++ei) {
    if (episode_mask && !(*episode_mask)[ei]) continue;
    const int64_t v = valid_starts(episodes_[ei], k);
    for (int64_t o = 0; o < v; ++o) starts.push_back(episodes_[ei].start + static_cast<size_t>(o));
  }
  if (starts.empty())
    throw DataError("enumerate_sequences: no window of length k=" + std::to_string(k));
  std::vector<SequenceSample> out;
  if (static_cast<int64_t>(starts.size()) <= max_count) {
    for (size_t s : starts) out.push_back(make_sequence(s, k));
  } else {
    // Even stride over the available windows; deterministic.
    const double stride = static_cast<double>(starts.size()) / static_cast<double>(max_count);
    for (int64_t i = 0; i < max_count; ++i)
      out.push_back(make_sequence(starts[static_cast<size_t>(i * stride)], k));
  }
  return out;
}

int64_t ReplayBuffer::valid_rollout_starts(const Episode& e, int64_t m) const {
  if (m == 1) return static_cast<int64_t>(e.len);  // every recorded s is non-terminal
  // Window spans transitions o .. o+m-2; if the episode ended in a terminal
  // transition, the window may not end on it (the final state would be
  // terminal and useless as a roll-out seed).
  const int64_t len = static_cast<int64_t>(e.len);
  const int64_t usable = e.terminal ? len - 1 : len;
  return std::max<int64_t>(0, usable - (m - 1) + 1);
}

std::vector<RolloutStart> ReplayBuffer::sample_rollout_starts(int64_t batch, int64_t m,
                                                              Rng& rng) const {
  if (m < 1) throw UsageError("sample_rollout_starts: m must be >= 1");
  int64_t total = 0;
  for (const auto& e : episodes_) total += valid_rollout_starts(e, m);
  if (total == 0)
    throw DataError("sample_rollout_starts: no window of m=" + std::to_string(m) +
                    " states; longest episode has " + std::to_string(longest_episode()) +
                    " transitions");
  std::vector<RolloutStart> out;
  out.reserve(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    int64_t idx = rng.uniform_int(0, total - 1);
    for (const auto& e : episodes_) {
      const int64_t v = valid_rollout_starts(e, m);
      if (idx >= v) {
        idx -= v;
        continue;
      }
      RolloutStart w;
      const size_t o = e.start + static_cast<size_t>(idx);
      if (m == 1) {
        w.states.push_back(transitions_[o].s);
      } else {
        for (int64_t i = 0; i < m - 1; ++i) {
          w.states.push_back(transitions_[o + static_cast<size_t>(i)].s);
          w.actions.push_back(transitions_[o + static_cast<size_t>(i)].a);
        }
        w.states.push_back(transitions_[o + static_cast<size_t>(m) - 2].s_next);
      }
      out.push_back(std::move(w));
      break;
    }
  }
  return out;
}

namespace {

PairWindow make_pair_window(const std::vector<Transition>& tr, size_t start, int64_t w) {
  PairWindow out;
  for (int64_t i = 0; i < w; ++i) {
    out.states.push_back(tr[start + static_cast<size_t>(i)].s);
    out.actions.push_back(tr[start + static_cast<size_t>(i)].a);
  }
  const Transition& last = tr[start + static_cast<size_t>(w) - 1];
  out.r_end = last.r;
  out.s_end = last.s_next;
  return out;
}

}  // namespace

std::vector<PairWindow> ReplayBuffer::sample_pair_windows(
    int64_t batch, int64_t w, Rng& rng, const std::vector<uint8_t>* episode_mask) const {
  if (w < 1) throw UsageError("sample_pair_windows: window must be >= 1");
  int64_t total = 0;
  for (size_t ei = 0; ei < episodes_.size(); ++ei) {
    if (episode_mask && !(*episode_mask)[ei]) continue;
    total += valid_starts(episodes_[ei], w);
  }
  if (total == 0)
    throw DataError("sample_pair_windows: no window of length " + std::to_string(w) +
                    "; longest episode has " + std::to_string(longest_episode()) + " transitions");
  std::vector<PairWindow> out;
  out.reserve(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) {
    int64_t idx = rng.uniform_int(0, total - 1);
    for (size_t ei = 0; ei < episodes_.size(); ++ei) {
      if (episode_mask && !(*episode_mask)[ei]) continue;
      const int64_t v = valid_starts(episodes_[ei], w);
      if (idx < v) {
        out.push_back(make_pair_window(transitions_, episodes_[ei].start + static_cast<size_t>(idx), w));
        break;
      }
      idx -= v;
    }
  }
  return out;
}

std::vector<PairWindow> ReplayBuffer::enumerate_pair_windows(
    int64_t w, int64_t max_count, const std::vector<uint8_t>* episode_mask) const {
  std::vector<size_t> starts;
  for (size_t ei = 0; ei < episodes_.size(); ++ei) {
    if (episode_mask && !(*episode_mask)[ei]) continue;
    const int64_t v = valid_starts(episodes_[ei], w);
    for (int64_t o = 0; o < v; ++o) starts.push_back(episodes_[ei].start + static_cast<size_t>(o));
  }
  if (starts.empty())
    throw DataError("enumerate_pair_windows: no window of length " + std::to_string(w));
  std::vector<PairWindow> out;
  if (static_cast<int64_t>(starts.size()) <= max_count) {
    for (size_t s : starts) out.push_back(make_pair_window(transitions_, s, w));
  } else {
    const double stride = static_cast<double>(starts.size()) / static_cast<double>(max_count);
    for (int64_t i = 0; i < max_count; ++i)
      out.push_back(make_pair_window(transitions_, starts[static_cast<size_t>(i * stride)], w));
  }
  return out;
}

std::vector<size_t> ReplayBuffer::sample_indices(int64_t batch, Rng& rng) const {
  if (transitions_.empty()) throw DataError("replay: cannot sample from empty buffer");
  std::vector<size_t> out(static_cast<size_t>(batch));
  for (auto& i : out)
    i = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(transitions_.size()) - 1));
  return out;
}

void ModelBuffer::add(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ModelBuffer::at(size_t i) const {
  return items_[(head_ + i) % items_.size()];
}

std::vector<size_t> ModelBuffer::sample_indices(int64_t batch, Rng& rng) const {
  if (items_.empty()) throw DataError("model buffer: cannot sample from empty buffer");
  std::vector<size_t> out(static_cast<size_t>(batch));
  for (auto& i : out)
    i = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(items_.size()) - 1));
  return out;
}

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(buf, v);
}

class Reader {
 public:
  Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    pos_ += 8;
    return v;
  }
  float f32() {
    const uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > data_.size()) throw IoError("dataset: truncated file " + path_);
  }
  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void write_dataset(const std::string& path, const ReplayBuffer& buffer,
                   const nlohmann::ordered_json& manifest) {
  std::string buf;
  buf.append("ADMD", 4);
  put_u32(buf, kDatasetVersion);
  put_u32(buf, static_cast<uint32_t>(buffer.state_dim()));
  put_u32(buf, static_cast<uint32_t>(buffer.action_dim()));
  put_u64(buf, buffer.size());
  const size_t n = buffer.size();
  for (size_t i = 0; i < n; ++i)
    for (float v : buffer.transition(i).s) put_f32(buf, v);
  for (size_t i = 0; i < n; ++i)
    for (float v : buffer.transition(i).a) put_f32(buf, v);
  for (size_t i = 0; i < n; ++i) put_f32(buf, buffer.transition(i).r);
  for (size_t i = 0; i < n; ++i)
    for (float v : buffer.transition(i).s_next) put_f32(buf, v);
  for (size_t i = 0; i < n; ++i) buf.push_back(buffer.transition(i).done ? '\1' : '\0');
  for (size_t i = 0; i < n; ++i) put_u32(buf, buffer.transition(i).episode_id);
  const std::string mjson = manifest.dump();
  put_u64(buf, mjson.size());
  buf.append(mjson);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("dataset: cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("dataset: write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("dataset: cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data, path);
  if (r.bytes(4) != "ADMD") throw IoError("dataset: bad magic in '" + path + "'");
  const uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw IoError("dataset: unsupported version " + std::to_string(version));
  const int64_t ds = static_cast<int64_t>(r.u32());
  const int64_t da = static_cast<int64_t>(r.u32());
  const size_t n = r.u64();

  std::vector<std::vector<float>> s(n), a(n), s_next(n);
  std::vector<float> rew(n);
  std::vector<uint8_t> done(n);
  std::vector<uint32_t> ep(n);
  for (size_t i = 0; i < n; ++i) {
    s[i].resize(static_cast<size_t>(ds));
    for (auto& v : s[i]) v = r.f32();
  }
  for (size_t i = 0; i < n; ++i) {
    a[i].resize(static_cast<size_t>(da));
    for (auto& v : a[i]) v = r.f32();
  }
  for (size_t i = 0; i < n; ++i) rew[i] = r.f32();
  for (size_t i = 0; i < n; ++i) {
    s_next[i].resize(static_cast<size_t>(ds));
    for (auto& v : s_next[i]) v = r.f32();
  }
  for (size_t i = 0; i < n; ++i) done[i] = r.u8();
  for (size_t i = 0; i < n; ++i) ep[i] = r.u32();
  const size_t mlen = r.u64();
  const std::string mjson = r.bytes(mlen);
  if (!r.done()) throw IoError("dataset: trailing bytes in '" + path + "'");

  Dataset out{ReplayBuffer(ds, da, n + 1), nlohmann::ordered_json::parse(mjson)};
  uint32_t prev_ep = n > 0 ? ep[0] : 0;
  for (size_t i = 0; i < n; ++i) {
    if (ep[i] < prev_ep) throw IoError("dataset: episode ids not non-decreasing in '" + path + "'");
    if (ep[i] != prev_ep) out.buffer.end_episode();
    prev_ep = ep[i];
    out.buffer.add(std::move(s[i]), std::move(a[i]), rew[i], std::move(s_next[i]), done[i] != 0);
  }
  out.buffer.end_episode();
  return out;
}

nlohmann::ordered_json gen_dataset(const Env& env, const Policy& policy,
                                   const std::string& policy_spec, int64_t episodes,
                                   uint64_t seed, const std::string& path) {
  ReplayBuffer buffer(env.spec().state_dim, env.spec().action_dim,
                      static_cast<size_t>(episodes * env.spec().max_episode_steps) + 1);
  double return_sum = 0;
  for (int64_t e = 0; e < episodes; ++e) {
    Rng reset_rng = Rng::derive(seed, {streams::kDataset, static_cast<uint64_t>(e), streams::kEnvReset});
    Rng act_rng = Rng::derive(seed, {streams::kDataset, static_cast<uint64_t>(e), streams::kPolicyAction});
    EnvState st = env.reset(reset_rng);
    double ep_return = 0;
    while (true) {
      const std::vector<float> a = policy.act(st.s, act_rng);
      StepResult res = env.step(st, a);
      ep_return += res.reward;
      buffer.add(st.s, a, res.reward, res.next.s, env.terminal(res.next.s));
      st = std::move(res.next);
      if (res.done) break;
    }
    buffer.end_episode();
    return_sum += ep_return;
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kDatasetVersion;
  manifest["env"] = env.spec().name;
  manifest["policy"] = policy_spec;
  manifest["seed"] = seed;
  manifest["episodes"] = episodes;
  manifest["transitions"] = buffer.size();
  manifest["mean_return"] = return_sum / static_cast<double>(episodes);
  manifest["state_dim"] = env.spec().state_dim;
  manifest["action_dim"] = env.spec().action_dim;
  write_dataset(path, buffer, manifest);
  return manifest;
}

}  // namespace admpo
