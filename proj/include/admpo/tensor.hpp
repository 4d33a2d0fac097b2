#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "admpo/errors.hpp"

namespace admpo {

// Dense row-major tensor. Rank 1 for vectors/biases, rank 2 for matrices;
// scalars are represented as shape {1}.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != static_cast<int64_t>(data.size()))
      throw ConfigError("tensor: shape " + shape_str() + " does not match data length " +
                        std::to_string(data.size()));
  }

  static int64_t numel(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int64_t> s) {
    const int64_t n = numel(s);
    return Tensor(std::move(s), std::vector<T>(static_cast<size_t>(n), T(0)));
  }

  static Tensor full(std::vector<int64_t> s, T v) {
    const int64_t n = numel(s);
    return Tensor(std::move(s), std::vector<T>(static_cast<size_t>(n), v));
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  // [1, n] row matrix from a flat vector.
  static Tensor row(const std::vector<T>& v) {
    return Tensor({1, static_cast<int64_t>(v.size())}, v);
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  int64_t rows() const { return rank() == 2 ? shape[0] : 1; }
  int64_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }

  T& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols() + j)]; }
  T at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols() + j)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

namespace kernels {

// C[MxN] = A[MxK] * B[KxN], accumulating into C. ikj order keeps the inner
// loop streaming over contiguous rows of B and C.
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[MxK] += dC[MxN] * B^T: dA[i,p] = sum_j dC[i,j] * B[p,j]
template <typename T>
void matmul_acc_da(const T* dc, const T* b, T* da, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* dcrow = dc + i * n;
    T* darow = da + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc = T(0);
      for (int64_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// dB[KxN] += A^T * dC: dB[p,j] = sum_i A[i,p] * dC[i,j]
template <typename T>
void matmul_acc_db(const T* a, const T* dc, T* db, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* dcrow = dc + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* dbrow = db + p * n;
      for (int64_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

template <typename T>
T softplus(T x) {
  // log(1 + e^x), stable for large |x|.
  const T ax = x > T(0) ? x : -x;
  return std::log1p(std::exp(-ax)) + (x > T(0) ? x : T(0));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

}  // namespace kernels

}  // namespace admpo
