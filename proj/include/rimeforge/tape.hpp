#pragma once

// Reverse-mode autodiff over dense arrays. Ops evaluate eagerly and record
// a node with whatever state backward needs; nodes are created in topological
// order by construction, so backward is a single reverse sweep.
//
// A tape is single-threaded. Parameter values are copied onto the tape at
// binding time, so the engine never mutates a ParamStore.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rimeforge/kernels.hpp"
#include "rimeforge/tensor.hpp"

namespace rimeforge {

template <typename T>
class Tape {
 public:
  struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
  };

  // --- leaves ---------------------------------------------------------

  Var input(Tensor<T> v) { return push(Op::Input, {}, std::move(v), false); }

  Var leaf(Tensor<T> v) { return push(Op::Leaf, {}, std::move(v), true); }

  Var param(const std::string& name, const Tensor<T>& v) {
    require(!param_nodes_.count(name), Err::BadConfig, "param bound twice on tape: " + name);
    Var out = push(Op::Param, {}, v, true);
    node(out).pname = name;
    param_nodes_[name] = out.id;
    return out;
  }

  // --- ops ------------------------------------------------------------

  Var matmul(Var a, Var b) {
    return push(Op::Matmul, {a, b}, kernels::matmul(val(a), val(b)));
  }

  // a @ b^T
  Var matmul_nt(Var a, Var b) {
    return push(Op::MatmulNT, {a, b}, kernels::matmul_nt(val(a), val(b)));
  }

  // Same shape, or b a [1,n] row broadcast over a's rows.
  Var add(Var a, Var b) {
    const Tensor<T>&A = val(a), &B = val(b);
    if (A.same_shape(B)) {
      Tensor<T> out = A;
      for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
      return push(Op::Add, {a, b}, std::move(out));
    }
    require(A.rank() == 2 && B.rank() == 2 && B.shape[0] == 1 && B.shape[1] == A.shape[1],
            Err::ShapeMismatch, "add: " + shape_str(A.shape) + " + " + shape_str(B.shape));
    Tensor<T> out = A;
    for (int64_t i = 0; i < A.shape[0]; ++i)
      for (int64_t j = 0; j < A.shape[1]; ++j) out.at(i, j) += B.data[j];
    return push(Op::AddRowVec, {a, b}, std::move(out));
  }

  Var sub(Var a, Var b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.same_shape(B), Err::ShapeMismatch, "sub: shape mismatch");
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
    return push(Op::Sub, {a, b}, std::move(out));
  }

  Var mul(Var a, Var b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.same_shape(B), Err::ShapeMismatch, "mul: shape mismatch");
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
    return push(Op::Mul, {a, b}, std::move(out));
  }

  // X[N,d] * g[1,d], g broadcast over rows.
  Var mul_rowvec(Var x, Var g) {
    const Tensor<T>&X = val(x), &G = val(g);
    require(X.rank() == 2 && G.rank() == 2 && G.shape[0] == 1 && G.shape[1] == X.shape[1],
            Err::ShapeMismatch, "mul_rowvec: shape mismatch");
    Tensor<T> out = X;
    for (int64_t i = 0; i < X.shape[0]; ++i)
      for (int64_t j = 0; j < X.shape[1]; ++j) out.at(i, j) *= G.data[j];
    return push(Op::MulRowVec, {x, g}, std::move(out));
  }

  // a * x + b, elementwise.
  Var affine(Var x, double a, double b) {
    Tensor<T> out = val(x);
    for (T& v : out.data) v = static_cast<T>(a * static_cast<double>(v) + b);
    Var r = push(Op::Affine, {x}, std::move(out));
    node(r).a = a;
    return r;
  }

  Var scale(Var x, double a) { return affine(x, a, 0.0); }

  Var tanh_op(Var x) {
    Tensor<T> out = val(x);
    for (T& v : out.data) v = std::tanh(v);
    return push(Op::Tanh, {x}, std::move(out));
  }

  Var exp_op(Var x) {
    Tensor<T> out = val(x);
    for (T& v : out.data) v = std::exp(v);
    return push(Op::Exp, {x}, std::move(out));
  }

  Var row_softmax(Var x) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2, Err::ShapeMismatch, "row_softmax: rank-2 required");
    Tensor<T> out(X.shape);
    for (int64_t i = 0; i < X.shape[0]; ++i)
      kernels::softmax_row(X.data.data() + i * X.shape[1], out.data.data() + i * X.shape[1],
                           X.shape[1]);
    return push(Op::RowSoftmax, {x}, std::move(out));
  }

  Var row_log_softmax(Var x) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2, Err::ShapeMismatch, "row_log_softmax: rank-2 required");
    Tensor<T> out(X.shape);
    for (int64_t i = 0; i < X.shape[0]; ++i)
      kernels::log_softmax_row(X.data.data() + i * X.shape[1], out.data.data() + i * X.shape[1],
                               X.shape[1]);
    return push(Op::RowLogSoftmax, {x}, std::move(out));
  }

  Var l2_normalize_rows(Var x) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2, Err::ShapeMismatch, "l2_normalize_rows: rank-2 required");
    Tensor<T> out(X.shape);
    Var r{};
    std::vector<T> norms(static_cast<size_t>(X.shape[0]));
    for (int64_t i = 0; i < X.shape[0]; ++i) {
      const T* xr = X.data.data() + i * X.shape[1];
      norms[static_cast<size_t>(i)] = static_cast<T>(std::sqrt(kernels::row_sumsq(xr, X.shape[1])));
      kernels::l2_normalize_row(xr, out.data.data() + i * X.shape[1], X.shape[1]);
    }
    r = push(Op::L2NormRows, {x}, std::move(out));
    node(r).saved = std::move(norms);
    return r;
  }

  Var rms_normalize_rows(Var x, double eps) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2, Err::ShapeMismatch, "rms_normalize_rows: rank-2 required");
    Tensor<T> out(X.shape);
    std::vector<T> inv_rms(static_cast<size_t>(X.shape[0]));
    for (int64_t i = 0; i < X.shape[0]; ++i) {
      const T* xr = X.data.data() + i * X.shape[1];
      inv_rms[static_cast<size_t>(i)] = static_cast<T>(
          1.0 / std::sqrt(kernels::row_sumsq(xr, X.shape[1]) / double(X.shape[1]) + eps));
      kernels::rms_normalize_row(xr, out.data.data() + i * X.shape[1], X.shape[1], eps);
    }
    Var r = push(Op::RmsNormRows, {x}, std::move(out));
    node(r).saved = std::move(inv_rms);
    node(r).a = eps;
    return r;
  }

  // Frobenius inner product of two same-shape tensors -> scalar.
  Var inner(Var a, Var b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.same_shape(B), Err::ShapeMismatch, "inner: shape mismatch");
    double s = 0;
    for (int64_t i = 0; i < A.numel(); ++i)
      s += static_cast<double>(A.data[i]) * static_cast<double>(B.data[i]);
    return push(Op::Inner, {a, b}, Tensor<T>::scalar(static_cast<T>(s)));
  }

  Var gather_rows(Var x, std::vector<int64_t> ids) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2, Err::ShapeMismatch, "gather_rows: rank-2 required");
    Tensor<T> out({static_cast<int64_t>(ids.size()), X.shape[1]});
    for (size_t i = 0; i < ids.size(); ++i) {
      require(ids[i] >= 0 && ids[i] < X.shape[0], Err::ShapeMismatch, "gather_rows: row id range");
      for (int64_t j = 0; j < X.shape[1]; ++j) out.at(static_cast<int64_t>(i), j) = X.at(ids[i], j);
    }
    Var r = push(Op::GatherRows, {x}, std::move(out));
    node(r).idx = std::move(ids);
    return r;
  }

  // Stack k vars of shape [1,d] (or [d]) into [k,d].
  Var stack_rows(std::span<const Var> rows) {
    require(!rows.empty(), Err::ShapeMismatch, "stack_rows: empty");
    const int64_t d = val(rows[0]).numel();
    Tensor<T> out({static_cast<int64_t>(rows.size()), d});
    std::vector<Var> parents(rows.begin(), rows.end());
    for (size_t i = 0; i < rows.size(); ++i) {
      const Tensor<T>& r = val(rows[i]);
      require(r.numel() == d && r.rank() <= 2, Err::ShapeMismatch, "stack_rows: row shape");
      for (int64_t j = 0; j < d; ++j) out.at(static_cast<int64_t>(i), j) = r.data[j];
    }
    return push_multi(Op::StackRows, parents, std::move(out));
  }

  // y[i] = X[i, ids[i]] -> rank-1 [N].
  Var pick(Var x, std::vector<int64_t> ids) {
    const Tensor<T>& X = val(x);
    require(X.rank() == 2 && static_cast<int64_t>(ids.size()) == X.shape[0], Err::ShapeMismatch,
            "pick: one id per row required");
    Tensor<T> out({static_cast<int64_t>(ids.size())});
    for (size_t i = 0; i < ids.size(); ++i) {
      require(ids[i] >= 0 && ids[i] < X.shape[1], Err::ShapeMismatch, "pick: column id range");
      out.data[i] = X.at(static_cast<int64_t>(i), ids[i]);
    }
    Var r = push(Op::Pick, {x}, std::move(out));
    node(r).idx = std::move(ids);
    return r;
  }

  Var sum_all(Var x) {
    double s = 0;
    for (T v : val(x).data) s += static_cast<double>(v);
    return push(Op::SumAll, {x}, Tensor<T>::scalar(static_cast<T>(s)));
  }

  Var mean_all(Var x) {
    double s = 0;
    for (T v : val(x).data) s += static_cast<double>(v);
    return push(Op::MeanAll, {x}, Tensor<T>::scalar(static_cast<T>(s / double(val(x).numel()))));
  }

  // Elementwise min; gradients route to the smaller input (ties: first).
  Var min2(Var a, Var b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require(A.same_shape(B), Err::ShapeMismatch, "min2: shape mismatch");
    Tensor<T> out = A;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(A.data[i], B.data[i]);
    return push(Op::Min2, {a, b}, std::move(out));
  }

  // Elementwise clamp to [lo, hi]; gradient passes inside the closed range.
  Var clip(Var x, double lo, double hi) {
    Tensor<T> out = val(x);
    for (T& v : out.data)
      v = static_cast<T>(std::min(hi, std::max(lo, static_cast<double>(v))));
    Var r = push(Op::Clip, {x}, std::move(out));
    node(r).a = lo;
    node(r).b = hi;
    return r;
  }

  // Causal multi-head self-attention; q,k,v: [S, d].
  Var attention(Var q, Var k, Var v, int heads) {
    const Tensor<T>& Q = val(q);
    const int64_t s = Q.shape[0];
    std::vector<T> probs(static_cast<size_t>(heads * s * s), T{0});
    Tensor<T> out = kernels::attention(Q, val(k), val(v), heads, probs.data());
    Var r = push(Op::Attention, {q, k, v}, std::move(out));
    node(r).saved = std::move(probs);
    node(r).heads = heads;
    return r;
  }

  // --- access ----------------------------------------------------------

  const Tensor<T>& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].val; }
  double scalar(Var v) const { return static_cast<double>(val(v).data[0]); }
  size_t size() const { return nodes_.size(); }

  // --- backward --------------------------------------------------------

  void backward(Var loss) {
    require(loss.valid() && val(loss).numel() == 1, Err::NonScalarLoss,
            "backward: loss must be scalar");
    grads_.assign(nodes_.size(), Tensor<T>());
    grad_at(loss.id) = Tensor<T>::full(val(loss).shape, T{1});
    for (int32_t i = static_cast<int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.track || grads_[static_cast<size_t>(i)].numel() == 0) continue;
      pull(i, n);
    }
  }

  // Gradient of the last backward() w.r.t. a tracked var (zeros if untouched).
  Tensor<T> grad(Var v) const {
    const Tensor<T>& g = grads_[static_cast<size_t>(v.id)];
    if (g.numel() == 0) return Tensor<T>::zeros(val(v).shape);
    return g;
  }

  // Gradients for every entry of `store` in declaration order; parameters the
  // loss never touched get zero gradients.
  GradMap<T> param_grads(const ParamStore<T>& store) const {
    GradMap<T> out;
    out.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      auto it = param_nodes_.find(store.names[i]);
      if (it == param_nodes_.end()) {
        out.push_back(Tensor<T>::zeros(store.values[i].shape));
        continue;
      }
      out.push_back(grad(Var{it->second}));
    }
    return out;
  }

 private:
  enum class Op : uint8_t {
    Input, Leaf, Param,
    Matmul, MatmulNT,
    Add, AddRowVec, Sub, Mul, MulRowVec, Affine,
    Tanh, Exp,
    RowSoftmax, RowLogSoftmax, L2NormRows, RmsNormRows,
    Inner, GatherRows, StackRows, Pick,
    SumAll, MeanAll, Min2, Clip, Attention,
  };

  struct Node {
    Op op;
    std::vector<int32_t> parents;
    Tensor<T> val;
    std::vector<T> saved;
    std::vector<int64_t> idx;
    double a = 0, b = 0;
    int heads = 0;
    bool track = false;
    std::string pname;
  };

  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }

  Var push(Op op, std::initializer_list<Var> parents, Tensor<T> value, bool force_track = false) {
    Node n;
    n.op = op;
    n.val = std::move(value);
    n.track = force_track || op == Op::Leaf || op == Op::Param;
    for (Var p : parents) {
      n.parents.push_back(p.id);
      n.track = n.track || nodes_[static_cast<size_t>(p.id)].track;
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size()) - 1};
  }

  Var push_multi(Op op, const std::vector<Var>& parents, Tensor<T> value) {
    Node n;
    n.op = op;
    n.val = std::move(value);
    for (Var p : parents) {
      n.parents.push_back(p.id);
      n.track = n.track || nodes_[static_cast<size_t>(p.id)].track;
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size()) - 1};
  }

  Tensor<T>& grad_at(int32_t id) {
    Tensor<T>& g = grads_[static_cast<size_t>(id)];
    if (g.numel() == 0) g = Tensor<T>::zeros(nodes_[static_cast<size_t>(id)].val.shape);
    return g;
  }

  bool tracked(int32_t id) const { return nodes_[static_cast<size_t>(id)].track; }

  void acc(int32_t id, const Tensor<T>& delta) {
    if (!tracked(id)) return;
    Tensor<T>& g = grad_at(id);
    for (int64_t i = 0; i < delta.numel(); ++i) g.data[i] += delta.data[i];
  }

  // Push this node's output gradient into its parents.
  void pull(int32_t id, Node& n) {
    const Tensor<T>& g = grads_[static_cast<size_t>(id)];
    switch (n.op) {
      case Op::Input:
      case Op::Leaf:
      case Op::Param:
        return;
      case Op::Matmul: {
        const Tensor<T>&A = pval(n, 0), &B = pval(n, 1);
        if (tracked(n.parents[0])) acc(n.parents[0], kernels::matmul_nt(g, B));
        if (tracked(n.parents[1])) acc(n.parents[1], kernels::matmul_tn(A, g));
        return;
      }
      case Op::MatmulNT: {
        const Tensor<T>&A = pval(n, 0), &B = pval(n, 1);
        if (tracked(n.parents[0])) acc(n.parents[0], kernels::matmul(g, B));
        if (tracked(n.parents[1])) acc(n.parents[1], kernels::matmul_tn(g, A));
        return;
      }
      case Op::Add:
        acc(n.parents[0], g);
        acc(n.parents[1], g);
        return;
      case Op::AddRowVec: {
        acc(n.parents[0], g);
        if (tracked(n.parents[1])) {
          Tensor<T> db({1, g.shape[1]});
          for (int64_t i = 0; i < g.shape[0]; ++i)
            for (int64_t j = 0; j < g.shape[1]; ++j) db.data[j] += g.at(i, j);
          acc(n.parents[1], db);
        }
        return;
      }
      case Op::Sub: {
        acc(n.parents[0], g);
        if (tracked(n.parents[1])) {
          Tensor<T> neg = g;
          for (T& v : neg.data) v = -v;
          acc(n.parents[1], neg);
        }
        return;
      }
      case Op::Mul: {
        const Tensor<T>&A = pval(n, 0), &B = pval(n, 1);
        if (tracked(n.parents[0])) {
          Tensor<T> d = g;
          for (int64_t i = 0; i < d.numel(); ++i) d.data[i] *= B.data[i];
          acc(n.parents[0], d);
        }
        if (tracked(n.parents[1])) {
          Tensor<T> d = g;
          for (int64_t i = 0; i < d.numel(); ++i) d.data[i] *= A.data[i];
          acc(n.parents[1], d);
        }
        return;
      }
      case Op::MulRowVec: {
        const Tensor<T>&X = pval(n, 0), &G = pval(n, 1);
        if (tracked(n.parents[0])) {
          Tensor<T> d = g;
          for (int64_t i = 0; i < d.shape[0]; ++i)
            for (int64_t j = 0; j < d.shape[1]; ++j) d.at(i, j) *= G.data[j];
          acc(n.parents[0], d);
        }
        if (tracked(n.parents[1])) {
          Tensor<T> d({1, g.shape[1]});
          for (int64_t i = 0; i < g.shape[0]; ++i)
            for (int64_t j = 0; j < g.shape[1]; ++j) d.data[j] += g.at(i, j) * X.at(i, j);
          acc(n.parents[1], d);
        }
        return;
      }
      case Op::Affine: {
        Tensor<T> d = g;
        for (T& v : d.data) v = static_cast<T>(static_cast<double>(v) * n.a);
        acc(n.parents[0], d);
        return;
      }
      case Op::Tanh: {
        Tensor<T> d = g;
        for (int64_t i = 0; i < d.numel(); ++i)
          d.data[i] *= T{1} - n.val.data[i] * n.val.data[i];
        acc(n.parents[0], d);
        return;
      }
      case Op::Exp: {
        Tensor<T> d = g;
        for (int64_t i = 0; i < d.numel(); ++i) d.data[i] *= n.val.data[i];
        acc(n.parents[0], d);
        return;
      }
      case Op::RowSoftmax: {
        // dx = y * (dy - <dy, y>) per row
        Tensor<T> d(n.val.shape);
        const int64_t r = n.val.shape[0], c = n.val.shape[1];
        for (int64_t i = 0; i < r; ++i) {
          double dot = 0;
          for (int64_t j = 0; j < c; ++j)
            dot += static_cast<double>(g.at(i, j)) * static_cast<double>(n.val.at(i, j));
          for (int64_t j = 0; j < c; ++j)
            d.at(i, j) = static_cast<T>(static_cast<double>(n.val.at(i, j)) *
                                        (static_cast<double>(g.at(i, j)) - dot));
        }
        acc(n.parents[0], d);
        return;
      }
      case Op::RowLogSoftmax: {
        // dx = dy - softmax(x) * sum(dy) per row; softmax = exp(val)
        Tensor<T> d(n.val.shape);
        const int64_t r = n.val.shape[0], c = n.val.shape[1];
        for (int64_t i = 0; i < r; ++i) {
          double s = 0;
          for (int64_t j = 0; j < c; ++j) s += static_cast<double>(g.at(i, j));
          for (int64_t j = 0; j < c; ++j)
            d.at(i, j) = static_cast<T>(static_cast<double>(g.at(i, j)) -
                                        std::exp(static_cast<double>(n.val.at(i, j))) * s);
        }
        acc(n.parents[0], d);
        return;
      }
      case Op::L2NormRows: {
        // dx = (dy - y * <y, dy>) / ||x||  per row
        Tensor<T> d(n.val.shape);
        const int64_t r = n.val.shape[0], c = n.val.shape[1];
        for (int64_t i = 0; i < r; ++i) {
          const double norm = static_cast<double>(n.saved[static_cast<size_t>(i)]);
          double dot = 0;
          for (int64_t j = 0; j < c; ++j)
            dot += static_cast<double>(n.val.at(i, j)) * static_cast<double>(g.at(i, j));
          for (int64_t j = 0; j < c; ++j)
            d.at(i, j) = static_cast<T>((static_cast<double>(g.at(i, j)) -
                                         static_cast<double>(n.val.at(i, j)) * dot) /
                                        norm);
        }
        acc(n.parents[0], d);
        return;
      }
      case Op::RmsNormRows: {
        // y = x*r; dx_j = r*dy_j - (r^2/n) * y_j * <x, dy>, x_j = y_j / r
        Tensor<T> d(n.val.shape);
        const int64_t r = n.val.shape[0], c = n.val.shape[1];
        for (int64_t i = 0; i < r; ++i) {
          const double inv_rms = static_cast<double>(n.saved[static_cast<size_t>(i)]);
          double xdy = 0;
          for (int64_t j = 0; j < c; ++j)
            xdy += (static_cast<double>(n.val.at(i, j)) / inv_rms) *
                   static_cast<double>(g.at(i, j));
          const double k = inv_rms * inv_rms / static_cast<double>(c) * xdy;
          for (int64_t j = 0; j < c; ++j)
            d.at(i, j) = static_cast<T>(inv_rms * static_cast<double>(g.at(i, j)) -
                                        k * static_cast<double>(n.val.at(i, j)));
        }
        acc(n.parents[0], d);
        return;
      }
      case Op::Inner: {
        const double s = static_cast<double>(g.data[0]);
        const Tensor<T>&A = pval(n, 0), &B = pval(n, 1);
        if (tracked(n.parents[0])) {
          Tensor<T> d = B;
          for (T& v : d.data) v = static_cast<T>(static_cast<double>(v) * s);
          acc(n.parents[0], d);
        }
        if (tracked(n.parents[1])) {
          Tensor<T> d = A;
          for (T& v : d.data) v = static_cast<T>(static_cast<double>(v) * s);
          acc(n.parents[1], d);
        }
        return;
      }
      case Op::GatherRows: {
        const Tensor<T>& X = pval(n, 0);
        Tensor<T> d(X.shape);
        for (size_t i = 0; i < n.idx.size(); ++i)
          for (int64_t j = 0; j < X.shape[1]; ++j)
            d.at(n.idx[i], j) += g.at(static_cast<int64_t>(i), j);
        acc(n.parents[0], d);
        return;
      }
      case Op::StackRows: {
        const int64_t c = n.val.shape[1];
        for (size_t i = 0; i < n.parents.size(); ++i) {
          if (!tracked(n.parents[i])) continue;
          Tensor<T> d(nodes_[static_cast<size_t>(n.parents[i])].val.shape);
          for (int64_t j = 0; j < c; ++j) d.data[j] = g.at(static_cast<int64_t>(i), j);
          acc(n.parents[i], d);
        }
        return;
      }
      case Op::Pick: {
        const Tensor<T>& X = pval(n, 0);
        Tensor<T> d(X.shape);
        for (size_t i = 0; i < n.idx.size(); ++i)
          d.at(static_cast<int64_t>(i), n.idx[i]) += g.data[i];
        acc(n.parents[0], d);
        return;
      }
      case Op::SumAll: {
        const Tensor<T>& X = pval(n, 0);
        acc(n.parents[0], Tensor<T>::full(X.shape, g.data[0]));
        return;
      }
      case Op::MeanAll: {
        const Tensor<T>& X = pval(n, 0);
        acc(n.parents[0],
            Tensor<T>::full(X.shape, static_cast<T>(static_cast<double>(g.data[0]) /
                                                    static_cast<double>(X.numel()))));
        return;
      }
      case Op::Min2: {
        const Tensor<T>&A = pval(n, 0), &B = pval(n, 1);
        Tensor<T> da(A.shape), db(B.shape);
        for (int64_t i = 0; i < A.numel(); ++i) {
          if (A.data[i] <= B.data[i])
            da.data[i] = g.data[i];
          else
            db.data[i] = g.data[i];
        }
        if (tracked(n.parents[0])) acc(n.parents[0], da);
        if (tracked(n.parents[1])) acc(n.parents[1], db);
        return;
      }
      case Op::Clip: {
        const Tensor<T>& X = pval(n, 0);
        Tensor<T> d(X.shape);
        for (int64_t i = 0; i < X.numel(); ++i) {
          const double x = static_cast<double>(X.data[i]);
          d.data[i] = (x >= n.a && x <= n.b) ? g.data[i] : T{0};
        }
        acc(n.parents[0], d);
        return;
      }
      case Op::Attention: {
        attention_backward(n, g);
        return;
      }
    }
  }

  void attention_backward(Node& n, const Tensor<T>& g) {
    const Tensor<T>&Q = pval(n, 0), &K = pval(n, 1), &V = pval(n, 2);
    const int64_t s = Q.shape[0], d = Q.shape[1];
    const int heads = n.heads;
    const int64_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor<T> dq(Q.shape), dk(K.shape), dv(V.shape);
    std::vector<double> dp(static_cast<size_t>(s));
    for (int h = 0; h < heads; ++h) {
      const int64_t c0 = static_cast<int64_t>(h) * dh;
      const T* P = n.saved.data() + static_cast<int64_t>(h) * s * s;
      for (int64_t i = 0; i < s; ++i) {
        const T* go = g.data.data() + i * d + c0;
        // dP[i,j] = <dO_i, V_j>, then dS via softmax jacobian
        double pd_dot = 0;
        for (int64_t j = 0; j <= i; ++j) {
          const T* vr = V.data.data() + j * d + c0;
          double x = 0;
          for (int64_t p = 0; p < dh; ++p)
            x += static_cast<double>(go[p]) * static_cast<double>(vr[p]);
          dp[static_cast<size_t>(j)] = x;
          pd_dot += x * static_cast<double>(P[i * s + j]);
        }
        for (int64_t j = 0; j <= i; ++j) {
          const double pij = static_cast<double>(P[i * s + j]);
          const double ds = pij * (dp[static_cast<size_t>(j)] - pd_dot) * inv_sqrt_dh;
          const T* kr = K.data.data() + j * d + c0;
          const T* qr = Q.data.data() + i * d + c0;
          T* dqr = dq.data.data() + i * d + c0;
          T* dkr = dk.data.data() + j * d + c0;
          T* dvr = dv.data.data() + j * d + c0;
          for (int64_t p = 0; p < dh; ++p) {
            dqr[p] = static_cast<T>(static_cast<double>(dqr[p]) + ds * static_cast<double>(kr[p]));
            dkr[p] = static_cast<T>(static_cast<double>(dkr[p]) + ds * static_cast<double>(qr[p]));
            dvr[p] = static_cast<T>(static_cast<double>(dvr[p]) +
                                    pij * static_cast<double>(go[p]));
          }
        }
      }
    }
    if (tracked(n.parents[0])) acc(n.parents[0], dq);
    if (tracked(n.parents[1])) acc(n.parents[1], dk);
    if (tracked(n.parents[2])) acc(n.parents[2], dv);
  }

  const Tensor<T>& pval(const Node& n, size_t i) const {
    return nodes_[static_cast<size_t>(n.parents[i])].val;
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::map<std::string, int32_t> param_nodes_;
};

}  // namespace rimeforge
