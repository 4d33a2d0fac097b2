#pragma once

#include <cstdint>
#include <vector>

#include "admpo/rng.hpp"

namespace admpo {

// Anything that maps a state to an action in [-1, 1]^action_dim.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<float> act(const std::vector<float>& s, Rng& rng) const = 0;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(int64_t action_dim) : dim_(action_dim) {}
  std::vector<float> act(const std::vector<float>&, Rng& rng) const override {
    std::vector<float> a(static_cast<size_t>(dim_));
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return a;
  }

 private:
  int64_t dim_;
};

}  // namespace admpo
