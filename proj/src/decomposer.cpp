// SPDX-License-Identifier: Apache-2.0
#include "afcn/decomposer.hpp"

#include <random>
#include <string>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

void check_decomposer_fits(std::size_t levels, std::size_t w_low, std::size_t w_high, std::size_t t_len) {
  if (levels < 1) throw ConfigError("decomposer needs K >= 1 levels");
  if (w_low % 2 == 0 || w_high % 2 == 0) {
    throw ConfigError("decomposer kernel widths must be odd, got w_L=" + std::to_string(w_low) +
                      " w_H=" + std::to_string(w_high));
  }
  const std::size_t span = (std::size_t{1} << (levels - 1)) * (w_low - 1);
  if (t_len <= span) {
    throw ConfigError("series length " + std::to_string(t_len) + " too short for level-" + std::to_string(levels) +
                      " dilated kernel span " + std::to_string(span));
  }
}

DecomposerParams init_decomposer(std::size_t levels, std::size_t w_low, std::size_t w_high, std::uint64_t seed,
                                 double noise, double leaky_slope) {
  if (levels < 1) throw ConfigError("decomposer needs K >= 1 levels");
  if (w_low % 2 == 0 || w_high % 2 == 0) throw ConfigError("decomposer kernel widths must be odd");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DecomposerParams p;
  p.leaky_slope = leaky_slope;
  for (std::size_t k = 0; k < levels; ++k) {
    Tensor low(Shape{w_low}, 1.0 / static_cast<double>(w_low));
    for (auto& v : low.data()) v += noise * gauss(rng);
    Tensor high(Shape{w_high});
    high[w_high / 2] = 1.0;
    for (auto& v : high.data()) v += noise * gauss(rng);
    p.low.emplace_back("decomposer.low" + std::to_string(k + 1), std::move(low));
    p.high.emplace_back("decomposer.high" + std::to_string(k + 1), std::move(high));
  }
  return p;
}

std::vector<Var> decompose(Var x, std::span<const Var> low, std::span<const Var> high, double leaky_slope) {
  if (low.size() != high.size() || low.empty()) throw ConfigError("decomposer needs matching low/high kernels, K >= 1");
  std::vector<Var> bands;
  bands.reserve(2 * low.size());
  Var prev = x;
  for (std::size_t k = 0; k < low.size(); ++k) {
    const std::size_t dilation = std::size_t{1} << k;
    Var l = ops::leaky_relu(ops::conv1d(prev, low[k], dilation), leaky_slope);
    Var h = ops::conv1d(ops::sub(prev, l), high[k], 1);
    bands.push_back(l);
    bands.push_back(h);
    prev = l;
  }
  return bands;
}

Tensor decompose(const Tensor& x, const DecomposerParams& params) {
  if (x.rank() != 2) throw DimensionError("decompose expects [N x T], got " + shape_str(x.shape()));
  check_decomposer_fits(params.levels(), params.low[0].value.size(), params.high[0].value.size(), x.cols());
  Tape tape;
  Var xv = tape.constant(x);
  std::vector<Var> low, high;
  for (const auto& p : params.low) low.push_back(tape.constant(p.value));
  for (const auto& p : params.high) high.push_back(tape.constant(p.value));
  std::vector<Tensor> bands;
  for (const Var& b : decompose(xv, low, high, params.leaky_slope)) bands.push_back(b.value());
  return stack(bands);
}

}  // namespace afcn
