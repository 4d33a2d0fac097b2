#pragma once

#include <cstdint>
#include <vector>

#include "admpo/model.hpp"

namespace admpo {

// Closed-form total variance of the next-state prediction across uniformly
// sampled backtracking lengths, computed in normalized state space:
//   u = || (1/m) sum_k (sigma_k^2 + mu_k^2) - mu_bar^2 ||_1
// with mu_bar = (1/m) sum_k mu_k, elementwise over state dimensions. Reward
// heads are excluded. The expectation over roll-out histories is realized by
// the single sampled history (one-sample estimate).
struct UncertaintyReading {
  double u = 0;                            // >= 0, normalized state units^2
  std::vector<std::vector<double>> mu_k;   // normalized per-k state means
  std::vector<std::vector<double>> std_k;  // normalized per-k state stds
  int64_t m = 0;
};

UncertaintyReading adm_uncertainty(const std::vector<GaussianPrediction>& predictions,
                                   const Normalizer& norm, int64_t m);

struct PenaltyConfig {
  double beta = 0;  // >= 0

  void validate() const;
};

// r_tilde = r - beta * u
float penalize(float r, const UncertaintyReading& reading, const PenaltyConfig& cfg);

}  // namespace admpo
