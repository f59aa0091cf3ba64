#pragma once

// Shared numeric kernels. The tape ops, the plain whole-sequence forward and
// the incremental decoder all call these same routines so that a value
// computed on any path is bit-identical to the same value on another path
// (per-row arithmetic is independent of other rows and accumulates in a
// fixed order).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "rimeforge/tensor.hpp"

namespace rimeforge::kernels {

// C[m,n] += A[m,k] * B[k,n]; C must be zero-initialized by the caller.
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[0], Err::ShapeMismatch,
          "matmul: " + shape_str(a.shape) + " x " + shape_str(b.shape));
  Tensor<T> c({a.shape[0], b.shape[1]});
  matmul_acc(a.data.data(), b.data.data(), c.data.data(), a.shape[0], a.shape[1], b.shape[1]);
  return c;
}

// A[m,k] * B[n,k]^T -> C[m,n]. Row-dot form, accumulation over k ascending.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[1], Err::ShapeMismatch,
          "matmul_nt: " + shape_str(a.shape) + " x " + shape_str(b.shape) + "^T");
  const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
  Tensor<T> c({m, n});
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a.data.data() + i * k;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b.data.data() + j * k;
      T s{0};
      for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c.at(i, j) = s;
    }
  }
  return c;
}

// A[m,k]^T * B[m,n] -> C[k,n].
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.shape[0] == b.shape[0], Err::ShapeMismatch,
          "matmul_tn: " + shape_str(a.shape) + "^T x " + shape_str(b.shape));
  const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<T> c({k, n});
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a.data.data() + i * k;
    const T* brow = b.data.data() + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c.data.data() + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// Row helpers operate on one row so results never depend on sibling rows.
// Reductions inside a row use double accumulation for precision; the result
// is cast back to T.

template <typename T>
double row_sumsq(const T* x, int64_t n) {
  double s = 0;
  for (int64_t j = 0; j < n; ++j) s += static_cast<double>(x[j]) * static_cast<double>(x[j]);
  return s;
}

// y = x / ||x||_2. Throws DegenerateNorm when ||x|| < min_norm.
template <typename T>
void l2_normalize_row(const T* x, T* y, int64_t n, double min_norm = 1e-12) {
  const double norm = std::sqrt(row_sumsq(x, n));
  require(norm >= min_norm, Err::DegenerateNorm, "l2_normalize: row norm below threshold");
  const double inv = 1.0 / norm;
  for (int64_t j = 0; j < n; ++j) y[j] = static_cast<T>(static_cast<double>(x[j]) * inv);
}

// y = x / sqrt(mean(x^2) + eps)
template <typename T>
void rms_normalize_row(const T* x, T* y, int64_t n, double eps) {
  const double inv = 1.0 / std::sqrt(row_sumsq(x, n) / static_cast<double>(n) + eps);
  for (int64_t j = 0; j < n; ++j) y[j] = static_cast<T>(static_cast<double>(x[j]) * inv);
}

// Max-subtracted softmax over one row.
template <typename T>
void softmax_row(const T* x, T* y, int64_t n) {
  double mx = static_cast<double>(x[0]);
  for (int64_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
  double sum = 0;
  for (int64_t j = 0; j < n; ++j) {
    const double e = std::exp(static_cast<double>(x[j]) - mx);
    y[j] = static_cast<T>(e);
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (int64_t j = 0; j < n; ++j) y[j] = static_cast<T>(static_cast<double>(y[j]) * inv);
}

template <typename T>
void log_softmax_row(const T* x, T* y, int64_t n) {
  double mx = static_cast<double>(x[0]);
  for (int64_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
  double sum = 0;
  for (int64_t j = 0; j < n; ++j) sum += std::exp(static_cast<double>(x[j]) - mx);
  const double lse = mx + std::log(sum);
  for (int64_t j = 0; j < n; ++j) y[j] = static_cast<T>(static_cast<double>(x[j]) - lse);
}

// Causal attention for one query row i over keys/values 0..i, one head.
// q: [dh]; K,V: rows of stride `stride` starting at column `col0`.
// Writes the output row (length dh) and, when probs != nullptr, the i+1
// attention probabilities.
template <typename T>
void attn_row(const T* q, const T* k_base, const T* v_base, int64_t stride, int64_t col0,
              int64_t upto, int64_t dh, double inv_sqrt_dh, T* out, T* probs_out) {
  double mx = -1e300;
  // scores in a small stack-ish buffer; sequence lengths are desk scale
  static thread_local std::vector<double> scores;
  scores.resize(static_cast<size_t>(upto) + 1);
  for (int64_t j = 0; j <= upto; ++j) {
    const T* krow = k_base + j * stride + col0;
    double s = 0;
    for (int64_t p = 0; p < dh; ++p) s += static_cast<double>(q[p]) * static_cast<double>(krow[p]);
    s *= inv_sqrt_dh;
    scores[static_cast<size_t>(j)] = s;
    mx = std::max(mx, s);
  }
  double denom = 0;
  for (int64_t j = 0; j <= upto; ++j) {
    const double e = std::exp(scores[static_cast<size_t>(j)] - mx);
    scores[static_cast<size_t>(j)] = e;
    denom += e;
  }
  const double inv = 1.0 / denom;
  for (int64_t p = 0; p < dh; ++p) out[p] = T{0};
  for (int64_t j = 0; j <= upto; ++j) {
    const double w = scores[static_cast<size_t>(j)] * inv;
    if (probs_out) probs_out[j] = static_cast<T>(w);
    const T* vrow = v_base + j * stride + col0;
    for (int64_t p = 0; p < dh; ++p)
      out[p] = static_cast<T>(static_cast<double>(out[p]) + w * static_cast<double>(vrow[p]));
  }
}

// Full-sequence causal multi-head attention. Q,K,V: [S, d], d = heads * dh.
// When probs != nullptr it receives heads*S*S entries (row-major per head,
// padded with zeros above the diagonal).
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, int heads,
                    T* probs) {
  require(q.same_shape(k) && q.same_shape(v) && q.rank() == 2, Err::ShapeMismatch,
          "attention: q/k/v shapes disagree");
  const int64_t s = q.shape[0], d = q.shape[1];
  require(d % heads == 0, Err::ShapeMismatch, "attention: d_model not divisible by heads");
  const int64_t dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor<T> out({s, d});
  for (int h = 0; h < heads; ++h) {
    const int64_t col0 = h * dh;
    for (int64_t i = 0; i < s; ++i) {
      T* prow = probs ? probs + (static_cast<int64_t>(h) * s + i) * s : nullptr;
      attn_row(q.data.data() + i * d + col0, k.data.data(), v.data.data(), d, col0, i, dh,
               inv_sqrt_dh, out.data.data() + i * d + col0, prow);
    }
  }
  return out;
}

}  // namespace rimeforge::kernels
