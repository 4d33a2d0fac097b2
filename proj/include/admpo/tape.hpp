#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "admpo/errors.hpp"
#include "admpo/tensor.hpp"

namespace admpo {

// Reverse-mode autodiff over a linear tape. Nodes are appended in program
// order, which is a valid topological order, so backward() is a single
// reverse sweep visiting each node exactly once.
//
// T = double in test/oracle mode (finite differences are not noise-limited),
// T = float in training mode.
template <typename T>
class Tape {
 public:
  using Id = int32_t;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    bool needs_grad = false;
    std::function<void(Tape&)> back;  // accumulates into input grads
  };

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Id leaf(Tensor<T> v, bool needs_grad) {
    return push(std::move(v), needs_grad, nullptr);
  }

  Id constant(Tensor<T> v) { return leaf(std::move(v), false); }

  const Tensor<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  const Tensor<T>& grad(Id id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0)
      throw UsageError("tape: gradient not populated; call backward() first");
    return n.grad;
  }

  size_t num_nodes() const { return nodes_.size(); }

  // ---- binary elementwise ----

  Id add(Id a, Id b) {
    check_same_shape("add", a, b);
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    return push_op(std::move(out), {a, b}, [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      });
      t.accum(b, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
      });
    });
  }

  Id sub(Id a, Id b) {
    check_same_shape("sub", a, b);
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
    return push_op(std::move(out), {a, b}, [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      });
      t.accum(b, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
      });
    });
  }

  Id mul(Id a, Id b) {
    check_same_shape("mul", a, b);
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
    return push_op(std::move(out), {a, b}, [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& va = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * vb2.data[i];
      });
      t.accum(b, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
      });
    });
  }

  // Elementwise min; ties route the gradient to a.
  Id min_elem(Id a, Id b) {
    check_same_shape("min", a, b);
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    for (int64_t i = 0; i < out.size(); ++i) out.data[i] = std::min(out.data[i], vb.data[i]);
    return push_op(std::move(out), {a, b}, [a, b](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& va = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i)
          if (va.data[i] <= vb2.data[i]) ga.data[i] += g.data[i];
      });
      t.accum(b, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < g.size(); ++i)
          if (va.data[i] > vb2.data[i]) gb.data[i] += g.data[i];
      });
    });
  }

  // ---- matmul & bias ----

  Id matmul(Id a, Id b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.shape[1] != vb.shape[0])
      throw ConfigError("matmul: incompatible shapes " + va.shape_str() + " and " + vb.shape_str());
    const int64_t m = va.shape[0], k = va.shape[1], n = vb.shape[1];
    Tensor<T> out = Tensor<T>::zeros({m, n});
    kernels::matmul_acc(va.data.data(), vb.data.data(), out.data.data(), m, k, n);
    return push_op(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& va2 = t.value(a);
      const Tensor<T>& vb2 = t.value(b);
      t.accum(a, [&](Tensor<T>& ga) {
        kernels::matmul_acc_da(g.data.data(), vb2.data.data(), ga.data.data(), m, k, n);
      });
      t.accum(b, [&](Tensor<T>& gb) {
        kernels::matmul_acc_db(va2.data.data(), g.data.data(), gb.data.data(), m, k, n);
      });
    });
  }

  // [MxN] + [N], broadcast over rows. The only broadcast in the op set.
  Id add_bias(Id a, Id bias) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(bias);
    if (va.rank() != 2 || vb.rank() != 1 || va.shape[1] != vb.shape[0])
      throw ConfigError("add_bias: incompatible shapes " + va.shape_str() + " and " + vb.shape_str());
    Tensor<T> out = va;
    const int64_t m = va.shape[0], n = va.shape[1];
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.data[i * n + j] += vb.data[j];
    return push_op(std::move(out), {a, bias}, [a, bias, m, n](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      });
      t.accum(bias, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) gb.data[j] += g.data[i * n + j];
      });
    });
  }

  // ---- scalar-constant ops ----

  Id scale(Id a, T c) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v *= c;
    return push_op(std::move(out), {a}, [a, c](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
      });
    });
  }

  Id add_scalar(Id a, T c) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v += c;
    return push_op(std::move(out), {a}, [a](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      });
    });
  }

  // ---- unary elementwise ----

  Id tanh(Id a) {
    return unary(a, [](T x) { return std::tanh(x); },
                 [](T x, T y) { (void)x; return T(1) - y * y; });
  }

  Id sigmoid(Id a) {
    return unary(a, [](T x) { return kernels::sigmoid(x); },
                 [](T x, T y) { (void)x; return y * (T(1) - y); });
  }

  Id relu(Id a) {
    return unary(a, [](T x) { return x > T(0) ? x : T(0); },
                 [](T x, T y) { (void)y; return x > T(0) ? T(1) : T(0); });
  }

  Id softplus(Id a) {
    return unary(a, [](T x) { return kernels::softplus(x); },
                 [](T x, T y) { (void)y; return kernels::sigmoid(x); });
  }

  // x * sigmoid(x); smooth everywhere, so composed-loss gradients admit
  // tight finite-difference checks.
  Id swish(Id a) {
    return unary(a, [](T x) { return x * kernels::sigmoid(x); },
                 [](T x, T y) {
                   (void)y;
                   const T s = kernels::sigmoid(x);
                   return s + x * s * (T(1) - s);
                 });
  }

  Id exp(Id a) {
    return unary(a, [](T x) { return std::exp(x); },
                 [](T x, T y) { (void)x; return y; });
  }

  Id log(Id a) {
    return unary(a, [](T x) { return std::log(x); },
                 [](T x, T y) { (void)y; return T(1) / x; });
  }

  Id square(Id a) {
    return unary(a, [](T x) { return x * x; },
                 [](T x, T y) { (void)y; return T(2) * x; });
  }

  // max(x, c) with a scalar constant; gradient is zero in the clamped region.
  Id clamp_min(Id a, T c) {
    return unary(a, [c](T x) { return x > c ? x : c; },
                 [c](T x, T y) { (void)y; return x > c ? T(1) : T(0); });
  }

  // ---- shape ops ----

  Id concat_cols(Id a, Id b) {
    const Tensor<T>& va = value(a);
    const Tensor<T>& vb = value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.shape[0] != vb.shape[0])
      throw ConfigError("concat: incompatible shapes " + va.shape_str() + " and " + vb.shape_str());
    const int64_t m = va.shape[0], na = va.shape[1], nb = vb.shape[1];
    Tensor<T> out = Tensor<T>::zeros({m, na + nb});
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < na; ++j) out.data[i * (na + nb) + j] = va.data[i * na + j];
      for (int64_t j = 0; j < nb; ++j) out.data[i * (na + nb) + na + j] = vb.data[i * nb + j];
    }
    return push_op(std::move(out), {a, b}, [a, b, m, na, nb](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < na; ++j) ga.data[i * na + j] += g.data[i * (na + nb) + j];
      });
      t.accum(b, [&](Tensor<T>& gb) {
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < nb; ++j) gb.data[i * nb + j] += g.data[i * (na + nb) + na + j];
      });
    });
  }

  // Columns [j0, j1) of a rank-2 tensor.
  Id slice_cols(Id a, int64_t j0, int64_t j1) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2 || j0 < 0 || j1 > va.shape[1] || j0 >= j1)
      throw ConfigError("slice: range [" + std::to_string(j0) + ", " + std::to_string(j1) +
                        ") invalid for shape " + va.shape_str());
    const int64_t m = va.shape[0], n = va.shape[1], w = j1 - j0;
    Tensor<T> out = Tensor<T>::zeros({m, w});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < w; ++j) out.data[i * w + j] = va.data[i * n + j0 + j];
    return push_op(std::move(out), {a}, [a, m, n, w, j0](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < w; ++j) ga.data[i * n + j0 + j] += g.data[i * w + j];
      });
    });
  }

  // ---- reductions ----

  Id reduce_sum(Id a) {
    const Tensor<T>& va = value(a);
    T s = T(0);
    for (T v : va.data) s += v;
    return push_op(Tensor<T>::scalar(s), {a}, [a](Tape& t, Id self) {
      const T g = t.nodes_[self].grad.data[0];
      t.accum(a, [&](Tensor<T>& ga) {
        for (auto& v : ga.data) v += g;
      });
    });
  }

  Id reduce_mean(Id a) {
    const int64_t n = value(a).size();
    return scale(reduce_sum(a), T(1) / static_cast<T>(n));
  }

  // Row-wise sum of a rank-2 tensor -> [M, 1].
  Id row_sum(Id a) {
    const Tensor<T>& va = value(a);
    if (va.rank() != 2)
      throw ConfigError("row_sum: expected rank-2 tensor, got " + va.shape_str());
    const int64_t m = va.shape[0], n = va.shape[1];
    Tensor<T> out = Tensor<T>::zeros({m, 1});
    for (int64_t i = 0; i < m; ++i) {
      T s = T(0);
      for (int64_t j = 0; j < n; ++j) s += va.data[i * n + j];
      out.data[i] = s;
    }
    return push_op(std::move(out), {a}, [a, m, n](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) ga.data[i * n + j] += g.data[i];
      });
    });
  }

  // ---- fused losses ----

  // Elementwise negative log density of `target` under N(mu, exp(log_std)^2):
  //   0.5*ln(2*pi) + log_std + 0.5 * (target - mu)^2 * exp(-2*log_std)
  Id gaussian_nll(Id mu, Id log_std, const Tensor<T>& target) {
    check_same_shape("gaussian_nll", mu, log_std);
    const Tensor<T>& vm = value(mu);
    if (!vm.same_shape(target))
      throw ConfigError("gaussian_nll: target shape " + const_cast<Tensor<T>&>(target).shape_str() +
                        " does not match mean shape " + vm.shape_str());
    const Tensor<T>& vs = value(log_std);
    Tensor<T> out = vm;
    for (int64_t i = 0; i < out.size(); ++i) {
      const T d = target.data[i] - vm.data[i];
      const T inv_var = std::exp(T(-2) * vs.data[i]);
      out.data[i] = T(0.5) * kLog2Pi + vs.data[i] + T(0.5) * d * d * inv_var;
    }
    Tensor<T> tgt = target;
    return push_op(std::move(out), {mu, log_std},
                   [mu, log_std, tgt = std::move(tgt)](Tape& t, Id self) {
                     const Tensor<T>& g = t.nodes_[self].grad;
                     const Tensor<T>& vm2 = t.value(mu);
                     const Tensor<T>& vs2 = t.value(log_std);
                     t.accum(mu, [&](Tensor<T>& gm) {
                       for (int64_t i = 0; i < g.size(); ++i) {
                         const T d = tgt.data[i] - vm2.data[i];
                         gm.data[i] += g.data[i] * (-d * std::exp(T(-2) * vs2.data[i]));
                       }
                     });
                     t.accum(log_std, [&](Tensor<T>& gs) {
                       for (int64_t i = 0; i < g.size(); ++i) {
                         const T d = tgt.data[i] - vm2.data[i];
                         gs.data[i] += g.data[i] * (T(1) - d * d * std::exp(T(-2) * vs2.data[i]));
                       }
                     });
                   });
  }

  // ---- backward ----

  void backward(Id loss) {
    Node& ln = nodes_[static_cast<size_t>(loss)];
    if (ln.value.size() != 1)
      throw UsageError("backward: loss must be scalar, got shape " + ln.value.shape_str());
    if (!ln.needs_grad)
      throw UsageError("backward: loss does not depend on any differentiable leaf");
    for (Id id = 0; id <= loss; ++id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.needs_grad)
        n.grad = Tensor<T>::zeros(n.value.shape);
      else
        n.grad = Tensor<T>();
    }
    ln.grad.data[0] = T(1);
    for (Id id = loss; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (n.needs_grad && n.back) n.back(*this);
    }
  }

 private:
  static constexpr T kLog2Pi = T(1.8378770664093454835606594728112353);

  Id push(Tensor<T> v, bool needs_grad, std::function<void(Tape&)> back) {
    if (check_finite_ && !v.all_finite())
      throw TrainingError("tape: non-finite value produced at node " +
                          std::to_string(nodes_.size()));
    nodes_.push_back(Node{std::move(v), Tensor<T>(), needs_grad, std::move(back)});
    return static_cast<Id>(nodes_.size() - 1);
  }

  template <typename F>
  Id push_op(Tensor<T> v, std::initializer_list<Id> inputs, F&& back_fn) {
    bool needs = false;
    for (Id i : inputs) needs = needs || nodes_[static_cast<size_t>(i)].needs_grad;
    Id self = static_cast<Id>(nodes_.size());
    std::function<void(Tape&)> back;
    if (needs)
      back = [self, fn = std::forward<F>(back_fn)](Tape& t) { fn(t, self); };
    return push(std::move(v), needs, std::move(back));
  }

  template <typename FwdF, typename BwdF>
  Id unary(Id a, FwdF fwd, BwdF dydx) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v = fwd(v);
    return push_op(std::move(out), {a}, [a, dydx](Tape& t, Id self) {
      const Tensor<T>& g = t.nodes_[self].grad;
      const Tensor<T>& x = t.value(a);
      const Tensor<T>& y = t.nodes_[self].value;
      t.accum(a, [&](Tensor<T>& ga) {
        for (int64_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * dydx(x.data[i], y.data[i]);
      });
    });
  }

  // Run f on the input's grad accumulator only if that input needs grad.
  template <typename F>
  void accum(Id input, F&& f) {
    Node& n = nodes_[static_cast<size_t>(input)];
    if (n.needs_grad) f(n.grad);
  }

  void check_same_shape(const char* op, Id a, Id b) const {
    const Tensor<T>& va = nodes_[static_cast<size_t>(a)].value;
    const Tensor<T>& vb = nodes_[static_cast<size_t>(b)].value;
    if (!va.same_shape(vb))
      throw ConfigError(std::string(op) + ": shape mismatch " + va.shape_str() + " vs " +
                        vb.shape_str());
  }

  std::vector<Node> nodes_;
  bool check_finite_;
};

// Soft clamp built from softplus at both bounds. Two numeric guards keep the
// output strictly inside (lo, hi) for every representable input: the upper
// anchor is shifted down by 2*log1p(exp(lo-hi)), and the lower softplus is
// floored at a few ulps of lo so it cannot underflow onto the bound.
template <typename T>
T soft_clamp_floor(T lo) {
  const T a = std::abs(lo);
  return T(4) * (std::nextafter(a, std::numeric_limits<T>::infinity()) - a);
}

template <typename T>
typename Tape<T>::Id soft_clamp(Tape<T>& t, typename Tape<T>::Id x, T lo, T hi) {
  const T delta = T(2) * std::log1p(std::exp(lo - hi));
  const T h = hi - delta;
  auto y = t.add_scalar(t.scale(t.softplus(t.add_scalar(t.scale(x, T(-1)), h)), T(-1)), h);
  return t.add_scalar(t.clamp_min(t.softplus(t.add_scalar(y, -lo)), soft_clamp_floor(lo)), lo);
}

// Raw (tape-free) soft clamp; must match the graph version bit-for-bit.
template <typename T>
T soft_clamp_raw(T x, T lo, T hi) {
  const T delta = T(2) * std::log1p(std::exp(lo - hi));
  const T h = hi - delta;
  const T y = -kernels::softplus(-x + h) + h;
  const T s = kernels::softplus(y - lo);
  return (s > soft_clamp_floor(lo) ? s : soft_clamp_floor(lo)) + lo;
}

}  // namespace admpo
