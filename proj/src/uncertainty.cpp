#include "admpo/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "admpo/errors.hpp"

namespace admpo {

UncertaintyReading adm_uncertainty(const std::vector<GaussianPrediction>& predictions,
                                   const Normalizer& norm, int64_t m) {
  if (static_cast<int64_t>(predictions.size()) != m)
    throw UsageError("adm_uncertainty: expected " + std::to_string(m) + " predictions, got " +
                     std::to_string(predictions.size()));
  const size_t ds = predictions.front().mean_s.size();
  if (ds != norm.s_mean.size())
    throw UsageError("adm_uncertainty: prediction dim does not match normalizer");

  UncertaintyReading out;
  out.m = m;
  for (const auto& p : predictions) {
    if (p.mean_s.size() != ds || p.std_s.size() != ds)
      throw UsageError("adm_uncertainty: mismatched prediction dims");
    std::vector<double> mu(ds), sd(ds);
    for (size_t j = 0; j < ds; ++j) {
      mu[j] = (static_cast<double>(p.mean_s[j]) - norm.s_mean[j]) / norm.s_std[j];
      sd[j] = static_cast<double>(p.std_s[j]) / norm.s_std[j];
    }
    out.mu_k.push_back(std::move(mu));
    out.std_k.push_back(std::move(sd));
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  double u = 0;
  for (size_t j = 0; j < ds; ++j) {
    double second_moment = 0;
    double mu_bar = 0;
    for (int64_t k = 0; k < m; ++k) {
      const double mu = out.mu_k[static_cast<size_t>(k)][j];
      const double sd = out.std_k[static_cast<size_t>(k)][j];
      second_moment += inv_m * (sd * sd + mu * mu);
      mu_bar += inv_m * mu;
    }
    // total variance per dimension; clamp tiny negative rounding residue
    u += std::max(0.0, second_moment - mu_bar * mu_bar);
  }
  out.u = u;
  return out;
}

void PenaltyConfig::validate() const {
  if (beta < 0) throw ConfigError("penalty.beta must be >= 0");
}

float penalize(float r, const UncertaintyReading& reading, const PenaltyConfig& cfg) {
  if (!std::isfinite(r)) throw UsageError("penalize: non-finite reward");
  return static_cast<float>(static_cast<double>(r) - cfg.beta * reading.u);
}

}  // namespace admpo
