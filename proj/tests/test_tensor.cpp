#include <cmath>
#include <vector>

#include "admpo/checkpoint.hpp"
#include "admpo/errors.hpp"
#include "admpo/nn.hpp"
#include "admpo/optim.hpp"
#include "admpo/rng.hpp"
#include "admpo/tape.hpp"
#include "admpo/tensor.hpp"
#include "doctest.h"

using namespace admpo;

namespace {

// Central finite differences of a scalar-valued function of one parameter
// tensor, evaluated in double.
template <typename F>
Tensor<double> finite_diff(Tensor<double>& param, F&& eval, double h = 1e-4) {
  Tensor<double> g = Tensor<double>::zeros(param.shape);
  for (int64_t i = 0; i < param.size(); ++i) {
    const double orig = param.data[i];
    param.data[i] = orig + h;
    const double up = eval();
    param.data[i] = orig - h;
    const double dn = eval();
    param.data[i] = orig;
    g.data[i] = (up - dn) / (2 * h);
  }
  return g;
}

double max_rel_err(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a.data[i]), std::abs(b.data[i]), 1e-6});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul identity") {
  Tape<double> t;
  auto a = t.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
  auto eye = t.constant(Tensor<double>({2, 2}, {1, 0, 0, 1}));
  auto c = t.matmul(a, eye);
  CHECK(t.value(c).data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("softplus at zero is ln 2") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>::scalar(0.0));
  auto y = t.softplus(x);
  CHECK(t.value(y).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gaussian nll of standard normal at mode") {
  Tape<double> t;
  auto mu = t.leaf(Tensor<double>::scalar(0.0), true);
  auto log_std = t.leaf(Tensor<double>::scalar(0.0), true);
  auto nll = t.gaussian_nll(mu, log_std, Tensor<double>::scalar(0.0));
  CHECK(t.value(nll).data[0] == doctest::Approx(0.5 * std::log(2 * 3.14159265358979323846)).epsilon(1e-12));
}

TEST_CASE("d/dx x^2 = 2x") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::scalar(3.0), true);
  auto y = t.square(x);
  t.backward(y);
  CHECK(t.grad(x).data[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("unreachable leaf gets zero gradient") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>::scalar(2.0), true);
  auto z = t.leaf(Tensor<double>::scalar(5.0), true);
  auto y = t.square(x);
  t.backward(y);
  CHECK(t.grad(z).data[0] == 0.0);
}

TEST_CASE("non-scalar loss rejected") {
  Tape<double> t;
  auto x = t.leaf(Tensor<double>({1, 2}, {1.0, 2.0}), true);
  auto y = t.square(x);
  CHECK_THROWS_AS(t.backward(y), UsageError);
}

TEST_CASE("shape mismatch names both shapes") {
  Tape<double> t;
  auto a = t.constant(Tensor<double>({2, 3}, std::vector<double>(6, 1.0)));
  auto b = t.constant(Tensor<double>({2, 2}, std::vector<double>(4, 1.0)));
  try {
    t.matmul(a, b);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("non-finite op output surfaces as error") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>::scalar(-1.0));
  CHECK_THROWS_AS(t.log(x), TrainingError);
}

// Gradient check over every differentiable op composed into one expression,
// against central finite differences in double.
TEST_CASE("composed op gradient vs finite differences") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng::derive(900, {seed});
    Tensor<double> w = Tensor<double>::zeros({3, 4});
    for (auto& v : w.data) v = rng.uniform(-1, 1);
    Tensor<double> b = Tensor<double>::zeros({4});
    for (auto& v : b.data) v = rng.uniform(-1, 1);
    Tensor<double> x = Tensor<double>::zeros({2, 3});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    Tensor<double> target = Tensor<double>::zeros({2, 2});
    for (auto& v : target.data) v = rng.uniform(-1, 1);

    Tape<double> t;
    auto wid = t.leaf(w, true);
    auto bid = t.leaf(b, true);
    auto xid = t.constant(x);
    auto h = t.add_bias(t.matmul(xid, wid), bid);
    auto h2 = t.concat_cols(t.tanh(t.slice_cols(h, 0, 2)), t.sigmoid(t.slice_cols(h, 2, 4)));
    auto h3 = t.add(t.relu(h2), t.softplus(t.mul(h2, h2)));
    auto mu = t.slice_cols(h3, 0, 2);
    auto ls = soft_clamp(t, t.slice_cols(h3, 2, 4), -5.0, 0.5);
    auto nll = t.gaussian_nll(mu, ls, target);
    auto extra = t.min_elem(t.exp(t.scale(mu, 0.1)), t.log(t.add_scalar(t.square(mu), 1.0)));
    auto loss = t.add(t.reduce_mean(nll), t.scale(t.reduce_sum(t.row_sum(extra)), 0.01));
    t.backward(loss);

    auto eval_scalar = [&]() {
      Tape<double> t2;
      auto wid2 = t2.leaf(w, true);
      auto bid2 = t2.leaf(b, true);
      auto xid2 = t2.constant(x);
      auto hh = t2.add_bias(t2.matmul(xid2, wid2), bid2);
      auto hh2 = t2.concat_cols(t2.tanh(t2.slice_cols(hh, 0, 2)), t2.sigmoid(t2.slice_cols(hh, 2, 4)));
      auto hh3 = t2.add(t2.relu(hh2), t2.softplus(t2.mul(hh2, hh2)));
      auto mu2 = t2.slice_cols(hh3, 0, 2);
      auto ls2 = soft_clamp(t2, t2.slice_cols(hh3, 2, 4), -5.0, 0.5);
      auto nll2 = t2.gaussian_nll(mu2, ls2, target);
      auto ex2 = t2.min_elem(t2.exp(t2.scale(mu2, 0.1)), t2.log(t2.add_scalar(t2.square(mu2), 1.0)));
      auto l2 = t2.add(t2.reduce_mean(nll2), t2.scale(t2.reduce_sum(t2.row_sum(ex2)), 0.01));
      return t2.value(l2).data[0];
    };

    Tensor<double> fd_w = finite_diff(w, eval_scalar);
    Tensor<double> fd_b = finite_diff(b, eval_scalar);
    CHECK(max_rel_err(t.grad(wid), fd_w) < 1e-4);
    CHECK(max_rel_err(t.grad(bid), fd_b) < 1e-4);
  }
}

TEST_CASE("gradient of GRU+MLP loss vs finite differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng = Rng::derive(901, {seed});
    auto gru = GruCell<double>::init(3, 4, rng);
    auto head = Mlp<double>::init(4, {4}, 2, rng);
    std::vector<Tensor<double>> xs;
    for (int s = 0; s < 3; ++s) {
      Tensor<double> x = Tensor<double>::zeros({2, 3});
      for (auto& v : x.data) v = rng.uniform(-1, 1);
      xs.push_back(x);
    }
    Tensor<double> target = Tensor<double>::zeros({2, 1});
    for (auto& v : target.data) v = rng.uniform(-1, 1);

    // analytic grads
    Tape<double> t;
    Binder<double> binder(t);
    auto gb = gru.bind(binder);
    auto hb = head.bind(binder);
    auto h = t.constant(Tensor<double>::zeros({2, 4}));
    for (auto& x : xs) h = gb.step(t, t.constant(x), h);
    auto out = hb.apply(t, h);
    auto mu = t.slice_cols(out, 0, 1);
    auto ls = soft_clamp(t, t.slice_cols(out, 1, 2), -5.0, 0.5);
    auto loss = t.reduce_mean(t.gaussian_nll(mu, ls, target));
    t.backward(loss);

    auto loss_only = [&]() {
      Tape<double> t2;
      Binder<double> b2(t2);
      auto gb2 = gru.bind(b2);
      auto hb2 = head.bind(b2);
      auto h2 = t2.constant(Tensor<double>::zeros({2, 4}));
      for (auto& x : xs) h2 = gb2.step(t2, t2.constant(x), h2);
      auto out2 = hb2.apply(t2, h2);
      auto mu2 = t2.slice_cols(out2, 0, 1);
      auto ls2 = soft_clamp(t2, t2.slice_cols(out2, 1, 2), -5.0, 0.5);
      return t2.value(t2.reduce_mean(t2.gaussian_nll(mu2, ls2, target))).data[0];
    };

    std::vector<Tensor<double>*> params;
    gru.visit("gru", [&](const std::string&, Tensor<double>& p) { params.push_back(&p); });
    head.visit("head", [&](const std::string&, Tensor<double>& p) { params.push_back(&p); });
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<double> fd = finite_diff(*params[i], loss_only);
      CHECK(max_rel_err(binder.grad(i), fd) < 1e-4);
    }
  }
}

TEST_CASE("tape determinism: same seed and inputs give identical grads") {
  auto run = [](uint64_t seed) {
    Rng rng = Rng::derive(902, {seed});
    auto net = Mlp<float>::init(3, {8}, 2, rng);
    Tensor<float> x = Tensor<float>::zeros({4, 3});
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1, 1));
    Tape<float> t;
    Binder<float> b(t);
    auto nb = net.bind(b);
    auto loss = t.reduce_mean(t.square(nb.apply(t, t.constant(x))));
    t.backward(loss);
    std::vector<float> all;
    for (size_t i = 0; i < b.size(); ++i)
      all.insert(all.end(), b.grad(i).data.begin(), b.grad(i).data.end());
    all.push_back(t.value(loss).data[0]);
    return all;
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}

TEST_CASE("adam first step moves by ~lr in sign direction") {
  Tensor<float> p = Tensor<float>({2}, {1.0f, -2.0f});
  Tensor<float> g = Tensor<float>({2}, {0.3f, -0.7f});
  Adam<float> opt(0.01f);
  opt.step({&p}, {&g});
  CHECK(p.data[0] == doctest::Approx(1.0f - 0.01f).epsilon(1e-4));
  CHECK(p.data[1] == doctest::Approx(-2.0f + 0.01f).epsilon(1e-4));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Tensor<float> p = Tensor<float>({2}, {1.0f, -2.0f});
  Tensor<float> g = Tensor<float>::zeros({2});
  Adam<float> opt(0.01f);
  opt.step({&p}, {&g});
  CHECK(p.data == std::vector<float>{1.0f, -2.0f});
}

TEST_CASE("adam minimizes 1-d quadratic and matches scalar reference") {
  // scalar reference Adam, written independently of the Tensor version
  double rx = 1.0, rm = 0.0, rv = 0.0;
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor<double> p = Tensor<double>::scalar(1.0);
  Adam<double> opt(lr);
  bool reached = false;
  for (int i = 1; i <= 2000; ++i) {
    const double g = rx;  // d/dx 0.5*x^2
    rm = b1 * rm + (1 - b1) * g;
    rv = b2 * rv + (1 - b2) * g * g;
    rx -= lr * (rm / (1 - std::pow(b1, i))) / (std::sqrt(rv / (1 - std::pow(b2, i))) + eps);

    Tensor<double> gt = Tensor<double>::scalar(p.data[0]);
    opt.step({&p}, {&gt});
    CHECK(p.data[0] == doctest::Approx(rx).epsilon(1e-12));
    if (std::abs(p.data[0]) < 1e-3) {
      reached = true;
      break;
    }
  }
  CHECK(reached);
}

TEST_CASE("checkpoint round trip") {
  Rng rng = Rng::derive(903, {});
  auto net = Mlp<float>::init(3, {4}, 2, rng);
  auto saved = collect_params(net, "net");
  save_checkpoint("test_ckpt.admp", saved);
  auto loaded = load_checkpoint("test_ckpt.admp");
  REQUIRE(loaded.size() == saved.size());
  for (size_t i = 0; i < saved.size(); ++i) {
    CHECK(loaded[i].first == saved[i].first);
    CHECK(loaded[i].second.shape == saved[i].second.shape);
    CHECK(loaded[i].second.data == saved[i].second.data);
  }
  auto net2 = Mlp<float>::init(3, {4}, 2, rng);
  restore_params(net2, "net", loaded);
  CHECK(net2.layers[0].weight.data == net.layers[0].weight.data);
  std::remove("test_ckpt.admp");
}

TEST_CASE("soft clamp keeps values strictly inside bounds") {
  const double lo = -10.0, hi = 0.5;
  for (double x : {-1e6, -50.0, -10.0, -9.999, 0.0, 0.49, 0.5, 1.0, 50.0, 1e6}) {
    const double y = soft_clamp_raw(x, lo, hi);
    CHECK(y > lo);
    CHECK(y < hi);
  }
  // near-identity in the interior
  CHECK(soft_clamp_raw(-5.0, lo, hi) == doctest::Approx(-5.0).epsilon(1e-2));
}
