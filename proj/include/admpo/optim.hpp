#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "admpo/errors.hpp"
#include "admpo/tensor.hpp"

namespace admpo {

// Adam with bias correction. Moment buffers are allocated lazily against the
// first step's parameter shapes and must keep matching afterwards.
template <typename T>
class Adam {
 public:
  explicit Adam(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  int64_t step_count() const { return step_; }
  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }

  void step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
    if (params.size() != grads.size())
      throw UsageError("adam: params/grads count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Tensor<T>::zeros(p->shape));
        v_.push_back(Tensor<T>::zeros(p->shape));
      }
    }
    ++step_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      const Tensor<T>& g = *grads[i];
      if (!p.same_shape(g))
        throw ConfigError("adam: gradient shape " + const_cast<Tensor<T>&>(g).shape_str() +
                          " does not match parameter shape " + p.shape_str());
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (int64_t j = 0; j < p.size(); ++j) {
        m.data[j] = beta1_ * m.data[j] + (T(1) - beta1_) * g.data[j];
        v.data[j] = beta2_ * v.data[j] + (T(1) - beta2_) * g.data[j] * g.data[j];
        const T mhat = m.data[j] / bc1;
        const T vhat = v.data[j] / bc2;
        p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  T lr_, beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace admpo
