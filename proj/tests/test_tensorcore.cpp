// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"
#include "afcn/parameter.hpp"
#include "oracles.hpp"

using namespace afcn;

TEST_CASE("matmul: identity and hand cases") {
  Tape tape;
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(ops::matmul(tape.constant(Tensor::identity(2)), tape.constant(m)).value() == m);
  CHECK(ops::matmul(tape.constant(m), tape.constant(Tensor::identity(2))).value() == m);
}

TEST_CASE("matmul: random 3x4 by 4x2 matches triple-loop oracle") {
  std::mt19937_64 rng(7);
  const Tensor a = oracle::random_matrix(3, 4, rng);
  const Tensor b = oracle::random_matrix(4, 2, rng);
  Tape tape;
  const Tensor got = ops::matmul(tape.constant(a), tape.constant(b)).value();
  CHECK(max_abs_diff(got, oracle::matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tape tape;
  auto a = tape.constant(Tensor(Shape{2, 3}));
  auto b = tape.constant(Tensor(Shape{2, 3}));
  try {
    ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x3] x [2x3]") != std::string::npos);
  }
}

TEST_CASE("conv1d: identity kernels preserve the signal") {
  Tape tape;
  const Tensor s = Tensor::vector({0.5, -1.0, 2.0, 3.0, -0.25, 4.0, 1.0, 0.0, 2.5});
  auto sig = tape.constant(s);
  CHECK(ops::conv1d(sig, tape.constant(Tensor::vector({0, 1, 0})), 1).value() == s);
  CHECK(ops::conv1d(sig, tape.constant(Tensor::vector({1})), 3).value() == s);
}

TEST_CASE("conv1d: dilated box filter on an impulse") {
  Tape tape;
  Tensor impulse(Shape{9});
  impulse[4] = 1.0;
  const auto out = ops::conv1d(tape.constant(impulse), tape.constant(Tensor::vector({1. / 3, 1. / 3, 1. / 3})), 2).value();
  // Hand-unrolled: taps at t-2, t, t+2 each weight 1/3.
  for (std::size_t t = 0; t < 9; ++t) {
    const double expected = (t == 2 || t == 4 || t == 6) ? 1.0 / 3.0 : 0.0;
    CHECK(out[t] == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("conv1d: matches padded-buffer oracle row-wise") {
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_matrix(3, 20, rng);
  const std::vector<double> k{0.3, -0.2, 0.5, 0.1, 0.7};
  Tape tape;
  for (std::size_t dil : {1u, 2u, 4u}) {
    const auto out = ops::conv1d(tape.constant(x), tape.constant(Tensor::vector(k)), dil).value();
    for (std::size_t r = 0; r < 3; ++r) {
      const auto ref = oracle::conv1d(oracle::row(x, r), k, dil);
      for (std::size_t t = 0; t < 20; ++t) CHECK(std::abs(out(r, t) - ref[t]) < 1e-12);
    }
  }
}

TEST_CASE("conv1d: even kernel width is a config error") {
  Tape tape;
  CHECK_THROWS_AS(ops::conv1d(tape.constant(Tensor(Shape{10})), tape.constant(Tensor(Shape{4})), 1), ConfigError);
}

TEST_CASE("backward: sum and masked sum") {
  Tape tape;
  std::mt19937_64 rng(1);
  const Tensor pv = oracle::random_matrix(3, 2, rng);
  auto p = tape.parameter(pv);
  tape.backward(ops::sum(p));
  const Tensor gp = p.grad();
  for (double g : gp.data()) CHECK(g == 1.0);

  Tape tape2;
  auto q = tape2.parameter(pv);
  tape2.backward(ops::sum(ops::hadamard(q, pv)));
  CHECK(max_abs_diff(q.grad(), pv) == 0.0);
}

TEST_CASE("backward: fan-out sums branch gradients") {
  Tape tape;
  auto x = tape.parameter(Tensor(Shape{4}, 0.3));
  auto f = ops::add(ops::sum(x), ops::sum(x));
  tape.backward(f);
  const Tensor gx = x.grad();
  for (double g : gx.data()) CHECK(g == 2.0);
}

TEST_CASE("backward: visits each recorded op once and rejects non-scalars") {
  Tape tape;
  auto x = tape.parameter(Tensor(Shape{2, 2}, 1.0));
  auto y = ops::relu(ops::matmul(x, x));
  auto z = ops::sum(y);
  CHECK(tape.backward(z) == 3);
  CHECK_THROWS_AS(tape.backward(y), UsageError);

  Tape other;
  auto w = other.parameter(Tensor::scalar(1.0));
  CHECK_THROWS_AS(tape.backward(w), UsageError);
}

TEST_CASE("finite_diff_check: quadratic is exact, constant is zero") {
  std::mt19937_64 rng(11);
  Parameter p("p", oracle::random_matrix(4, 3, rng));
  const Tensor a = oracle::random_matrix(3, 3, rng);
  ParameterRefs refs{&p};
  // f(P) = Σ (PᵀP)·A
  auto loss = [&] {
    Tape tape;
    auto pv = tape.constant(p.value);
    return ops::sum(ops::matmul(ops::matmul(ops::transpose(pv), pv), tape.constant(a))).value().item();
  };
  auto grads = [&] {
    Tape tape;
    auto pv = tape.parameter(p.value);
    tape.backward(ops::sum(ops::matmul(ops::matmul(ops::transpose(pv), pv), tape.constant(a))));
    p.grad = pv.grad();
  };
  CHECK(finite_diff_check(refs, loss, grads, 1e-5, 50, 5) < 1e-9);

  auto constant = [] { return 3.0; };
  auto zero = [&] { p.grad = Tensor(p.value.shape()); };
  CHECK(finite_diff_check(refs, constant, zero, 1e-5, 20, 5) == 0.0);
}

TEST_CASE("gradients of every op agree with central differences") {
  std::mt19937_64 rng(21);
  Parameter a("a", oracle::random_matrix(5, 12, rng));
  Parameter k("k", Tensor::vector({0.2, 0.3, 0.1, -0.4, 0.25}));
  Parameter w("w", oracle::random_matrix(5, 3, rng));
  Parameter s("s", Tensor::scalar(0.7));
  Parameter bias("b", Tensor::vector({0.1, -0.2, 0.3}));
  ParameterRefs refs{&a, &k, &w, &s, &bias};

  auto graph = [&](Tape& tape, bool train) {
    auto bind = [&](Parameter& p) { return train ? tape.parameter(p.value) : tape.constant(p.value); };
    Var av = bind(a), kv = bind(k), wv = bind(w), sv = bind(s), bv = bind(bias);
    Var conv = ops::leaky_relu(ops::conv1d(av, kv, 2), 0.01);
    Var corr = ops::pearson(ops::sub(av, conv));
    Var proj = ops::matmul(corr, wv);
    Var cross = ops::matmul_nt(proj, ops::matmul(corr, wv));
    Var blocks[] = {corr, ops::scale_by(cross, sv)};
    ops::BlockPlacement placed[] = {{0, 0, blocks[0]}, {0, 1, blocks[1]}, {1, 0, ops::transpose(blocks[1])}};
    Var big = ops::assemble_blocks(2, 5, placed);
    Var norm = ops::normalize_adjacency(big);
    Var feats = ops::concat_rows(std::vector<Var>{corr, corr});
    Var z = ops::add_bias(ops::matmul(ops::relu(ops::matmul(norm, feats)), wv), bv);
    Var h = ops::block_row_mean(z, 2);
    Var ce = ops::cross_entropy(ops::reshape(ops::matmul(h, ops::transpose(h)), Shape{4}), 2);
    Var div = ops::cosine_diversity(z);
    Var l1 = ops::mean_abs(cross);
    return ops::add(ops::add(ce, ops::scale(div, 0.3)), ops::add(l1, ops::mean(z)));
  };
  auto loss = [&] {
    Tape tape;
    return graph(tape, false).value().item();
  };
  auto grads = [&] {
    Tape tape;
    Var out = graph(tape, true);
    tape.backward(out);
    a.grad = tape.grad(0);
    k.grad = tape.grad(1);
    w.grad = tape.grad(2);
    s.grad = tape.grad(3);
    bias.grad = tape.grad(4);
  };
  CHECK(finite_diff_check(refs, loss, grads, 1e-5, 200, 99) < 1e-4);
}

TEST_CASE("determinism: identical inputs give bit-identical values and gradients") {
  std::mt19937_64 rng(5);
  const Tensor x = oracle::random_matrix(4, 16, rng);
  auto run = [&] {
    Tape tape;
    auto p = tape.parameter(x);
    auto out = ops::sum(ops::normalize_adjacency(ops::pearson(p)));
    tape.backward(out);
    return std::make_pair(out.value(), p.grad());
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}

#ifdef AFCN_FINITE_CHECKS
TEST_CASE("non-finite values are rejected at op boundaries") {
  Tape tape;
  auto x = tape.constant(Tensor::vector({1.0, 1e308}));
  CHECK_THROWS_AS(ops::scale(x, 1e10), NumericError);
}
#endif
