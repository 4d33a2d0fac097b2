#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "admpo/rng.hpp"
#include "admpo/tape.hpp"
#include "admpo/tensor.hpp"

namespace admpo {

// Parameter containers double as both raw evaluators (no tape, used on the
// rollout/eval hot path) and graph builders (bound into a Tape for training).
// Raw and graph paths share the same kernels so values agree bit-for-bit.

// Binds parameter tensors into a tape once per loss; after backward the
// gradients are read back in binding order.
template <typename T>
class Binder {
 public:
  explicit Binder(Tape<T>& tape) : tape_(tape) {}

  typename Tape<T>::Id bind(Tensor<T>& param) {
    const auto id = tape_.leaf(param, true);
    params_.push_back(&param);
    ids_.push_back(id);
    return id;
  }

  size_t size() const { return params_.size(); }
  Tensor<T>* param(size_t i) const { return params_[i]; }
  const Tensor<T>& grad(size_t i) const { return tape_.grad(ids_[i]); }

 private:
  Tape<T>& tape_;
  std::vector<Tensor<T>*> params_;
  std::vector<typename Tape<T>::Id> ids_;
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  static Linear init(int64_t in, int64_t out, Rng& rng) {
    Linear l;
    l.weight = Tensor<T>::zeros({in, out});
    l.bias = Tensor<T>::zeros({out});
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : l.weight.data) w = static_cast<T>(rng.uniform(-s, s));
    for (auto& b : l.bias.data) b = static_cast<T>(rng.uniform(-s, s));
    return l;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Tensor<T> apply(const Tensor<T>& x) const {
    const int64_t m = x.shape[0], k = x.shape[1], n = weight.shape[1];
    Tensor<T> out = Tensor<T>::zeros({m, n});
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out.data[i * n + j] = bias.data[j];
    kernels::matmul_acc(x.data.data(), weight.data.data(), out.data.data(), m, k, n);
    return out;
  }

  struct Bound {
    typename Tape<T>::Id weight, bias;
    typename Tape<T>::Id apply(Tape<T>& t, typename Tape<T>::Id x) const {
      return t.add_bias(t.matmul(x, weight), bias);
    }
  };

  Bound bind(Binder<T>& b) { return Bound{b.bind(weight), b.bind(bias)}; }
};

// Single GRU cell:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wc + (r * h) Uc + bc)
//   h' = (1 - z) * h + z * c
template <typename T>
struct GruCell {
  Tensor<T> wz, uz, bz;
  Tensor<T> wr, ur, br;
  Tensor<T> wc, uc, bc;
  int64_t input_dim = 0, hidden_dim = 0;

  static GruCell init(int64_t in, int64_t hidden, Rng& rng) {
    GruCell g;
    g.input_dim = in;
    g.hidden_dim = hidden;
    const double si = 1.0 / std::sqrt(static_cast<double>(in));
    const double sh = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto mk = [&](int64_t r, int64_t c, double s) {
      Tensor<T> m = Tensor<T>::zeros({r, c});
      for (auto& w : m.data) w = static_cast<T>(rng.uniform(-s, s));
      return m;
    };
    auto mkb = [&](int64_t n) {
      Tensor<T> v = Tensor<T>::zeros({n});
      for (auto& w : v.data) w = static_cast<T>(rng.uniform(-sh, sh));
      return v;
    };
    g.wz = mk(in, hidden, si); g.uz = mk(hidden, hidden, sh); g.bz = mkb(hidden);
    g.wr = mk(in, hidden, si); g.ur = mk(hidden, hidden, sh); g.br = mkb(hidden);
    g.wc = mk(in, hidden, si); g.uc = mk(hidden, hidden, sh); g.bc = mkb(hidden);
    return g;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".wz", wz); f(prefix + ".uz", uz); f(prefix + ".bz", bz);
    f(prefix + ".wr", wr); f(prefix + ".ur", ur); f(prefix + ".br", br);
    f(prefix + ".wc", wc); f(prefix + ".uc", uc); f(prefix + ".bc", bc);
  }

  Tensor<T> step(const Tensor<T>& x, const Tensor<T>& h) const {
    const int64_t m = x.shape[0], n = hidden_dim;
    auto gate = [&](const Tensor<T>& w, const Tensor<T>& u, const Tensor<T>& b,
                    const Tensor<T>& hin) {
      Tensor<T> out = Tensor<T>::zeros({m, n});
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.data[i * n + j] = b.data[j];
      kernels::matmul_acc(x.data.data(), w.data.data(), out.data.data(), m, x.shape[1], n);
      kernels::matmul_acc(hin.data.data(), u.data.data(), out.data.data(), m, n, n);
      return out;
    };
    Tensor<T> z = gate(wz, uz, bz, h);
    for (auto& v : z.data) v = kernels::sigmoid(v);
    Tensor<T> r = gate(wr, ur, br, h);
    for (auto& v : r.data) v = kernels::sigmoid(v);
    Tensor<T> rh = r;
    for (int64_t i = 0; i < rh.size(); ++i) rh.data[i] *= h.data[i];
    Tensor<T> c = gate(wc, uc, bc, rh);
    for (auto& v : c.data) v = std::tanh(v);
    Tensor<T> out = Tensor<T>::zeros({m, n});
    for (int64_t i = 0; i < out.size(); ++i)
      out.data[i] = (T(1) - z.data[i]) * h.data[i] + z.data[i] * c.data[i];
    return out;
  }

  struct Bound {
    typename Tape<T>::Id wz, uz, bz, wr, ur, br, wc, uc, bc;

    typename Tape<T>::Id step(Tape<T>& t, typename Tape<T>::Id x,
                              typename Tape<T>::Id h) const {
      auto z = t.sigmoid(t.add_bias(t.add(t.matmul(x, wz), t.matmul(h, uz)), bz));
      auto r = t.sigmoid(t.add_bias(t.add(t.matmul(x, wr), t.matmul(h, ur)), br));
      auto rh = t.mul(r, h);
      auto c = t.tanh(t.add_bias(t.add(t.matmul(x, wc), t.matmul(rh, uc)), bc));
      // (1 - z) * h + z * c  ==  h - z*h + z*c
      return t.add(t.sub(h, t.mul(z, h)), t.mul(z, c));
    }
  };

  Bound bind(Binder<T>& b) {
    return Bound{b.bind(wz), b.bind(uz), b.bind(bz), b.bind(wr), b.bind(ur),
                 b.bind(br), b.bind(wc), b.bind(uc), b.bind(bc)};
  }
};

enum class Activation { kRelu, kSwish };

// Plain MLP with a linear output layer. Policy/value nets use ReLU; the
// dynamics-model heads use swish so the composed loss stays smooth.
template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;
  Activation activation = Activation::kRelu;

  static Mlp init(int64_t in, const std::vector<int64_t>& hidden, int64_t out, Rng& rng,
                  Activation act = Activation::kRelu) {
    Mlp m;
    m.activation = act;
    int64_t prev = in;
    for (int64_t h : hidden) {
      m.layers.push_back(Linear<T>::init(prev, h, rng));
      prev = h;
    }
    m.layers.push_back(Linear<T>::init(prev, out, rng));
    return m;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (size_t i = 0; i < layers.size(); ++i) layers[i].visit(prefix + ".l" + std::to_string(i), f);
  }

  Tensor<T> apply(const Tensor<T>& x) const {
    Tensor<T> h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].apply(h);
      if (i + 1 < layers.size()) {
        if (activation == Activation::kRelu) {
          for (auto& v : h.data) v = v > T(0) ? v : T(0);
        } else {
          for (auto& v : h.data) v = v * kernels::sigmoid(v);
        }
      }
    }
    return h;
  }

  struct Bound {
    std::vector<typename Linear<T>::Bound> layers;
    Activation activation = Activation::kRelu;
    typename Tape<T>::Id apply(Tape<T>& t, typename Tape<T>::Id x) const {
      auto h = x;
      for (size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].apply(t, h);
        if (i + 1 < layers.size())
          h = activation == Activation::kRelu ? t.relu(h) : t.swish(h);
      }
      return h;
    }
  };

  Bound bind(Binder<T>& b) {
    Bound out;
    out.activation = activation;
    for (auto& l : layers) out.layers.push_back(l.bind(b));
    return out;
  }
};

// Copies parameters from src into dst (same architecture).
template <typename T, typename Net>
void copy_params(Net& dst, Net& src) {
  std::vector<Tensor<T>*> d, s;
  dst.visit("", [&](const std::string&, Tensor<T>& p) { d.push_back(&p); });
  src.visit("", [&](const std::string&, Tensor<T>& p) { s.push_back(&p); });
  for (size_t i = 0; i < d.size(); ++i) *d[i] = *s[i];
}

// Polyak update: target <- (1 - tau) * target + tau * online.
template <typename T, typename Net>
void polyak_update(Net& target, Net& online, T tau) {
  std::vector<Tensor<T>*> tg, on;
  target.visit("", [&](const std::string&, Tensor<T>& p) { tg.push_back(&p); });
  online.visit("", [&](const std::string&, Tensor<T>& p) { on.push_back(&p); });
  for (size_t i = 0; i < tg.size(); ++i)
    for (int64_t j = 0; j < tg[i]->size(); ++j)
      tg[i]->data[j] = (T(1) - tau) * tg[i]->data[j] + tau * on[i]->data[j];
}

}  // namespace admpo
