// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "afcn/decomposer.hpp"
#include "afcn/errors.hpp"
#include "afcn/ops.hpp"
#include "oracles.hpp"

using namespace afcn;

namespace {

Tensor sinusoids(std::size_t n, std::size_t t, double freq) {
  Tensor x(Shape{n, t});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < t; ++k)
      x(r, k) = 2.0 + std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(k) + 0.7 * static_cast<double>(r));
  return x;
}

// Summed per-row variance of band b.
double energy(const Tensor& bands, std::size_t b) {
  double e = 0.0;
  const auto len = static_cast<double>(bands.dim(2));
  for (std::size_t i = 0; i < bands.dim(1); ++i) {
    double m = 0.0;
    for (std::size_t t = 0; t < bands.dim(2); ++t) m += bands(b, i, t) / len;
    for (std::size_t t = 0; t < bands.dim(2); ++t) e += (bands(b, i, t) - m) * (bands(b, i, t) - m);
  }
  return e;
}

}  // namespace

TEST_CASE("decompose: K=2 output shape") {
  std::mt19937_64 rng(1);
  const auto params = init_decomposer(2, 5, 3, 0);
  const Tensor out = decompose(oracle::random_matrix(8, 64, rng), params);
  CHECK(out.shape() == Shape{4, 8, 64});
}

TEST_CASE("decompose: identity low-pass leaves a zero high band") {
  DecomposerParams p = init_decomposer(1, 5, 3, 0, 0.0);
  p.low[0].value = Tensor::vector({0, 0, 1, 0, 0});
  Tensor x(Shape{3, 20});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + static_cast<double>(i % 7);
  const Tensor out = decompose(x, p);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 20; ++t) {
      CHECK(out(0, i, t) == x(i, t));
      CHECK(out(1, i, t) == 0.0);
    }
}

TEST_CASE("init_decomposer: box and identity kernels, seeded noise") {
  const auto exact = init_decomposer(2, 5, 3, 4, 0.0);
  for (const auto& k : exact.low)
    for (double v : k.value.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  for (const auto& k : exact.high) CHECK(k.value == Tensor::vector({0, 1, 0}));
  CHECK(exact.low[1].name == "decomposer.low2");

  const auto a = init_decomposer(2, 5, 3, 4);
  const auto b = init_decomposer(2, 5, 3, 4);
  CHECK(a.low[0].value == b.low[0].value);
  CHECK(a.high[1].value == b.high[1].value);
  CHECK(max_abs_diff(a.low[0].value, exact.low[0].value) > 0.0);
  CHECK(max_abs_diff(a.low[0].value, exact.low[0].value) < 0.1);
}

TEST_CASE("decompose with noiseless init equals a fixed dyadic smoother") {
  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_matrix(3, 40, rng);
  const auto params = init_decomposer(2, 5, 3, 0, 0.0);
  const Tensor out = decompose(x, params);
  const std::vector<double> box(5, 0.2);
  auto leaky = [](double v) { return v > 0 ? v : 0.01 * v; };
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> prev = oracle::row(x, r);
    for (std::size_t k = 0; k < 2; ++k) {
      auto low = oracle::conv1d(prev, box, std::size_t{1} << k);
      for (auto& v : low) v = leaky(v);
      for (std::size_t t = 0; t < 40; ++t) {
        CHECK(std::abs(out(2 * k, r, t) - low[t]) < 1e-12);
        CHECK(std::abs(out(2 * k + 1, r, t) - (prev[t] - low[t])) < 1e-12);
      }
      prev = low;
    }
  }
}

TEST_CASE("decompose is equivariant to ROI permutation") {
  std::mt19937_64 rng(9);
  const Tensor x = oracle::random_matrix(5, 48, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor xp(x.shape());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t t = 0; t < 48; ++t) xp(i, t) = x(perm[i], t);
  const auto params = init_decomposer(2, 5, 3, 11);
  const Tensor a = decompose(x, params), b = decompose(xp, params);
  for (std::size_t band = 0; band < 4; ++band)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t t = 0; t < 48; ++t) CHECK(b(band, i, t) == a(band, perm[i], t));
}

TEST_CASE("box initialization separates slow and fast sinusoids") {
  const auto params = init_decomposer(1, 5, 3, 0, 0.0);
  const Tensor slow = decompose(sinusoids(2, 128, 0.03), params);
  const Tensor fast = decompose(sinusoids(2, 128, 0.2), params);
  CHECK(energy(slow, 0) > 5.0 * energy(slow, 1));
  CHECK(energy(fast, 1) > 5.0 * energy(fast, 0));
}

TEST_CASE("check_decomposer_fits rejects unusable settings") {
  CHECK_NOTHROW(check_decomposer_fits(2, 5, 3, 64));
  CHECK_THROWS_AS(check_decomposer_fits(0, 5, 3, 64), ConfigError);
  CHECK_THROWS_AS(check_decomposer_fits(2, 4, 3, 64), ConfigError);
  CHECK_THROWS_AS(check_decomposer_fits(2, 5, 2, 64), ConfigError);
  CHECK_THROWS_AS(check_decomposer_fits(4, 5, 3, 32), ConfigError);
}

TEST_CASE("decompose on the tape matches the value path and carries gradients") {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_matrix(4, 32, rng);
  const auto params = init_decomposer(2, 5, 3, 1);
  Tape tape;
  std::vector<Var> low, high;
  for (const auto& p : params.low) low.push_back(tape.parameter(p.value));
  for (const auto& p : params.high) high.push_back(tape.parameter(p.value));
  const auto bands = decompose(tape.constant(x), low, high, params.leaky_slope);
  REQUIRE(bands.size() == 4);
  const Tensor ref = decompose(x, params);
  for (std::size_t b = 0; b < 4; ++b) CHECK(max_abs_diff(bands[b].value(), ref.slab(b)) == 0.0);
  tape.backward(ops::sum(ops::hadamard(bands[3], x)));
  CHECK(max_abs_diff(low[0].grad(), Tensor(Shape{5})) > 0.0);
  CHECK(max_abs_diff(high[1].grad(), Tensor(Shape{3})) > 0.0);
}
