#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rimeforge/gradcheck.hpp"
#include "rimeforge/rng.hpp"
#include "rimeforge/tape.hpp"

using namespace rimeforge;
using Var = Tape<double>::Var;

namespace {

Tensor<double> random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// FD-checks a scalar tape function of the given parameters.
template <typename BuildFn>
double op_grad_error(const ParamStore<double>& params, BuildFn build) {
  auto eval = [&](const ParamStore<double>& p) {
    Tape<double> tape;
    return tape.scalar(build(tape, p));
  };
  auto grad = [&](const ParamStore<double>& p) {
    Tape<double> tape;
    Var loss = build(tape, p);
    tape.backward(loss);
    return tape.param_grads(p);
  };
  return grad_check(eval, grad, params, 1e-5).max_rel_error;
}

// Reduce a non-scalar output to a smooth scalar via a fixed weight tensor.
Var weighted(Tape<double>& tape, Var x, uint64_t salt) {
  Rng rng(salt, 777);
  Tensor<double> w(tape.val(x).shape);
  for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
  return tape.inner(x, tape.input(std::move(w)));
}

}  // namespace

TEST_CASE("tape: forward op examples", "[tape]") {
  Tape<double> tape;
  auto v = tape.l2_normalize_rows(tape.input(Tensor<double>::row({3.0, 4.0})));
  REQUIRE(tape.val(v).data[0] == Catch::Approx(0.6).margin(1e-12));
  REQUIRE(tape.val(v).data[1] == Catch::Approx(0.8).margin(1e-12));

  auto sm = tape.row_softmax(tape.input(Tensor<double>::row({0.0, 0.0})));
  REQUIRE(tape.val(sm).data[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(tape.val(sm).data[1] == Catch::Approx(0.5).margin(1e-12));

  auto ip = tape.inner(tape.input(Tensor<double>::vec({1, 0, 0})),
                       tape.input(Tensor<double>::vec({0, 1, 0})));
  REQUIRE(tape.scalar(ip) == 0.0);
}

TEST_CASE("tape: degenerate norm is an error, not an epsilon result", "[tape]") {
  Tape<double> tape;
  auto x = tape.input(Tensor<double>::row({1e-13, 0.0}));
  REQUIRE_THROWS_AS(tape.l2_normalize_rows(x), Error);
  try {
    Tape<double> t2;
    t2.l2_normalize_rows(t2.input(Tensor<double>::row({0.0, 0.0})));
    FAIL("expected DegenerateNorm");
  } catch (const Error& e) {
    REQUIRE(e.code() == Err::DegenerateNorm);
  }
}

TEST_CASE("tape: shape mismatch raises", "[tape]") {
  Tape<double> tape;
  auto a = tape.input(Tensor<double>::zeros({2, 3}));
  auto b = tape.input(Tensor<double>::zeros({2, 3}));
  REQUIRE_THROWS_AS(tape.matmul(a, b), Error);
}

TEST_CASE("tape: linear and quadratic gradients", "[tape]") {
  Rng rng(3, 0);
  Tensor<double> xv = random_tensor({5}, rng);
  Tensor<double> cv = random_tensor({5}, rng);

  Tape<double> tape;
  auto x = tape.leaf(xv);
  auto c = tape.input(cv);
  tape.backward(tape.inner(x, c));
  auto gx = tape.grad(x);
  for (int i = 0; i < 5; ++i) REQUIRE(gx.data[i] == Catch::Approx(cv.data[i]).margin(1e-15));

  Tape<double> tape2;
  auto x2 = tape2.leaf(xv);
  tape2.backward(tape2.scale(tape2.inner(x2, x2), 0.5));
  auto gx2 = tape2.grad(x2);
  for (int i = 0; i < 5; ++i) REQUIRE(gx2.data[i] == Catch::Approx(xv.data[i]).margin(1e-12));
}

TEST_CASE("tape: non-scalar loss rejected", "[tape]") {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::zeros({2, 2}));
  REQUIRE_THROWS_AS(tape.backward(x), Error);
}

TEST_CASE("tape: untouched parameters get zero gradients", "[tape]") {
  ParamStore<double> ps;
  Rng rng(4, 0);
  ps.add("used", random_tensor({3}, rng));
  ps.add("unused", random_tensor({2, 2}, rng));
  Tape<double> tape;
  auto u = tape.param("used", ps["used"]);
  tape.backward(tape.sum_all(u));
  auto grads = tape.param_grads(ps);
  REQUIRE(grads.size() == 2);
  for (double v : grads[0].data) REQUIRE(v == 1.0);
  for (double v : grads[1].data) REQUIRE(v == 0.0);
}

TEST_CASE("tape: every op matches central finite differences", "[tape][fd]") {
  Rng rng(12345, 0);
  constexpr double kTol = 1e-6;

  SECTION("matmul") {
    ParamStore<double> ps;
    ps.add("a", random_tensor({3, 4}, rng));
    ps.add("b", random_tensor({4, 2}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.matmul(t.param("a", p["a"]), t.param("b", p["b"])), 1);
    });
    REQUIRE(err < kTol);
  }
  SECTION("matmul_nt") {
    ParamStore<double> ps;
    ps.add("a", random_tensor({3, 4}, rng));
    ps.add("b", random_tensor({5, 4}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.matmul_nt(t.param("a", p["a"]), t.param("b", p["b"])), 2);
    });
    REQUIRE(err < kTol);
  }
  SECTION("add same-shape and row broadcast") {
    ParamStore<double> ps;
    ps.add("a", random_tensor({3, 4}, rng));
    ps.add("b", random_tensor({3, 4}, rng));
    ps.add("bias", random_tensor({1, 4}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto s = t.add(t.param("a", p["a"]), t.param("b", p["b"]));
      return weighted(t, t.add(s, t.param("bias", p["bias"])), 3);
    });
    REQUIRE(err < kTol);
  }
  SECTION("sub, mul, affine") {
    ParamStore<double> ps;
    ps.add("a", random_tensor({2, 3}, rng));
    ps.add("b", random_tensor({2, 3}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto d = t.sub(t.param("a", p["a"]), t.param("b", p["b"]));
      auto m = t.mul(d, t.affine(d, 0.7, -0.2));
      return weighted(t, m, 4);
    });
    REQUIRE(err < kTol);
  }
  SECTION("mul_rowvec") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 4}, rng));
    ps.add("g", random_tensor({1, 4}, rng, 0.5, 1.5));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.mul_rowvec(t.param("x", p["x"]), t.param("g", p["g"])), 5);
    });
    REQUIRE(err < kTol);
  }
  SECTION("tanh and exp") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({2, 5}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto x = t.param("x", p["x"]);
      return weighted(t, t.add(t.tanh_op(x), t.exp_op(x)), 6);
    });
    REQUIRE(err < kTol);
  }
  SECTION("row_softmax") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 6}, rng, -2, 2));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.row_softmax(t.param("x", p["x"])), 7);
    });
    REQUIRE(err < kTol);
  }
  SECTION("row_log_softmax") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 6}, rng, -2, 2));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.row_log_softmax(t.param("x", p["x"])), 8);
    });
    REQUIRE(err < kTol);
  }
  SECTION("l2_normalize_rows") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 4}, rng, 0.5, 2.0));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.l2_normalize_rows(t.param("x", p["x"])), 9);
    });
    REQUIRE(err < kTol);
  }
  SECTION("rms_normalize_rows") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 4}, rng, 0.5, 2.0));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.rms_normalize_rows(t.param("x", p["x"]), 1e-6), 10);
    });
    REQUIRE(err < kTol);
  }
  SECTION("gather_rows with a repeated row") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({4, 3}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      return weighted(t, t.gather_rows(t.param("x", p["x"]), {2, 0, 2}), 11);
    });
    REQUIRE(err < kTol);
  }
  SECTION("stack_rows and pick") {
    ParamStore<double> ps;
    ps.add("r0", random_tensor({1, 4}, rng));
    ps.add("r1", random_tensor({1, 4}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      std::vector<Var> rows{t.param("r0", p["r0"]), t.param("r1", p["r1"])};
      auto s = t.stack_rows(rows);
      return t.sum_all(t.pick(s, {3, 1}));
    });
    REQUIRE(err < kTol);
  }
  SECTION("sum_all, mean_all") {
    ParamStore<double> ps;
    ps.add("x", random_tensor({3, 3}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto x = t.param("x", p["x"]);
      return t.add(t.sum_all(x), t.mean_all(t.exp_op(x)));
    });
    REQUIRE(err < kTol);
  }
  SECTION("min2 and clip away from kinks") {
    ParamStore<double> ps;
    ps.add("a", random_tensor({6}, rng, -1.0, -0.2));
    ps.add("b", random_tensor({6}, rng, 0.2, 1.0));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto m = t.min2(t.param("a", p["a"]), t.param("b", p["b"]));
      return t.sum_all(t.clip(m, -0.9, 0.15));
    });
    REQUIRE(err < kTol);
  }
  SECTION("attention") {
    ParamStore<double> ps;
    ps.add("q", random_tensor({5, 8}, rng));
    ps.add("k", random_tensor({5, 8}, rng));
    ps.add("v", random_tensor({5, 8}, rng));
    double err = op_grad_error(ps, [](Tape<double>& t, const ParamStore<double>& p) {
      auto o = t.attention(t.param("q", p["q"]), t.param("k", p["k"]), t.param("v", p["v"]), 2);
      return weighted(t, o, 12);
    });
    REQUIRE(err < kTol);
  }
}

TEST_CASE("tape: softmax family numeric contracts", "[tape]") {
  Rng rng(99, 0);
  Tensor<double> x = random_tensor({8, 12}, rng, -30, 30);
  Tape<double> tape;
  auto xs = tape.input(x);
  auto sm = tape.row_softmax(xs);
  auto lsm = tape.row_log_softmax(xs);
  for (int64_t i = 0; i < 8; ++i) {
    double s = 0;
    for (int64_t j = 0; j < 12; ++j) s += tape.val(sm).at(i, j);
    REQUIRE(std::abs(s - 1.0) < 1e-12);
    for (int64_t j = 0; j < 12; ++j)
      REQUIRE(std::abs(std::log(tape.val(sm).at(i, j)) - tape.val(lsm).at(i, j)) < 1e-10);
  }
  auto l2 = tape.l2_normalize_rows(xs);
  for (int64_t i = 0; i < 8; ++i) {
    double s = 0;
    for (int64_t j = 0; j < 12; ++j) s += tape.val(l2).at(i, j) * tape.val(l2).at(i, j);
    REQUIRE(std::abs(std::sqrt(s) - 1.0) < 1e-10);
  }
}

TEST_CASE("tape: forward is bit-deterministic", "[tape]") {
  auto run = [] {
    Rng rng(7, 7);
    Tensor<double> a = random_tensor({4, 4}, rng), b = random_tensor({4, 4}, rng);
    Tape<double> t;
    auto o = t.row_softmax(t.matmul(t.input(a), t.input(b)));
    return t.val(o).data;
  };
  auto r1 = run(), r2 = run();
  REQUIRE(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

// InfoNCE composed from primitive ops: gradient vs finite differences on a
// random 4x8 batch (the composition the objectives module builds on).
TEST_CASE("tape: InfoNCE composition matches finite differences", "[tape][fd]") {
  Rng rng(2024, 0);
  ParamStore<double> ps;
  ps.add("Q", random_tensor({4, 8}, rng, 0.2, 1.0));
  ps.add("T", random_tensor({4, 8}, rng, 0.2, 1.0));
  auto build = [](Tape<double>& t, const ParamStore<double>& p) {
    auto q = t.l2_normalize_rows(t.param("Q", p["Q"]));
    auto tt = t.l2_normalize_rows(t.param("T", p["T"]));
    auto scores = t.scale(t.matmul_nt(q, tt), 1.0 / 0.5);
    auto lsm = t.row_log_softmax(scores);
    return t.scale(t.sum_all(t.pick(lsm, {0, 1, 2, 3})), -0.25);
  };
  auto eval = [&](const ParamStore<double>& p) {
    Tape<double> t;
    return t.scalar(build(t, p));
  };
  auto grad = [&](const ParamStore<double>& p) {
    Tape<double> t;
    auto loss = build(t, p);
    t.backward(loss);
    return t.param_grads(p);
  };
  auto res = grad_check(eval, grad, ps, 1e-5);
  REQUIRE(res.max_rel_error < 1e-6);
}

TEST_CASE("grad_check: harness self-tests", "[tape]") {
  Rng rng(55, 0);
  ParamStore<double> ps;
  ps.add("x", random_tensor({6}, rng));

  // f = sum(x): exact constant gradient
  auto eval = [](const ParamStore<double>& p) {
    double s = 0;
    for (double v : p["x"].data) s += v;
    return s;
  };
  auto grad_ok = [](const ParamStore<double>& p) {
    GradMap<double> g;
    g.push_back(Tensor<double>::full(p["x"].shape, 1.0));
    return g;
  };
  REQUIRE(grad_check(eval, grad_ok, ps, 1e-5).max_rel_error < 1e-10);

  // intentionally wrong analytic gradient (2x) -> relative error 0.5
  auto grad_bad = [](const ParamStore<double>& p) {
    GradMap<double> g;
    g.push_back(Tensor<double>::full(p["x"].shape, 2.0));
    return g;
  };
  double err = grad_check(eval, grad_bad, ps, 1e-5).max_rel_error;
  REQUIRE(err == Catch::Approx(0.5).margin(1e-6));

  // non-finite evaluation detected
  auto eval_nan = [](const ParamStore<double>&) { return std::nan(""); };
  REQUIRE_THROWS_AS(grad_check(eval_nan, grad_ok, ps, 1e-5), Error);
}
