#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "admpo/tensor.hpp"

namespace admpo {

// Parameter checkpoint, little-endian binary:
//   header  { magic "ADMP", version u32, count u32 }
//   tensor  { name_len u32, name bytes, rank u32, dims u32..., f32 data }
constexpr uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor<float>>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

// Collects (name, tensor copy) pairs from any net exposing visit().
template <typename Net>
NamedTensors collect_params(Net& net, const std::string& prefix) {
  NamedTensors out;
  net.visit(prefix, [&](const std::string& name, Tensor<float>& t) { out.emplace_back(name, t); });
  return out;
}

// Writes loaded tensors back into a net; throws if names or shapes disagree.
template <typename Net>
void restore_params(Net& net, const std::string& prefix, const NamedTensors& loaded) {
  size_t idx = 0;
  net.visit(prefix, [&](const std::string& name, Tensor<float>& t) {
    if (idx >= loaded.size())
      throw IoError("checkpoint: missing tensor '" + name + "'");
    const auto& [lname, lt] = loaded[idx];
    if (lname != name)
      throw IoError("checkpoint: expected tensor '" + name + "', found '" + lname + "'");
    if (!t.same_shape(lt))
      throw IoError("checkpoint: shape mismatch for '" + name + "': expected " + t.shape_str() +
                    ", found " + const_cast<Tensor<float>&>(lt).shape_str());
    t = lt;
    ++idx;
  });
  if (idx != loaded.size())
    throw IoError("checkpoint: file holds " + std::to_string(loaded.size()) +
                  " tensors, net expects " + std::to_string(idx));
}

}  // namespace admpo
