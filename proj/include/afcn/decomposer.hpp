// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "afcn/parameter.hpp"
#include "afcn/tape.hpp"

namespace afcn {

/// One low-pass and one high-pass kernel per cascade level, shared by all ROIs.
struct DecomposerParams {
  std::vector<Parameter> low;   // low[k]: width w_L, applied with dilation 2^k
  std::vector<Parameter> high;  // high[k]: width w_H, dilation 1
  double leaky_slope = 0.01;

  std::size_t levels() const noexcept { return low.size(); }
};

/// Box-filter low kernels and identity high kernels, each perturbed by
/// N(0, noise²).
DecomposerParams init_decomposer(std::size_t levels, std::size_t w_low, std::size_t w_high, std::uint64_t seed,
                                 double noise = 0.01, double leaky_slope = 0.01);

/// Cascade on the tape. Returns 2K band vars ordered L1, H1, L2, H2, ...
/// `low`/`high` are the kernel vars for each level.
std::vector<Var> decompose(Var x, std::span<const Var> low, std::span<const Var> high, double leaky_slope);

/// Value-only cascade producing the [2K × N × T] sub-band stack.
Tensor decompose(const Tensor& x, const DecomposerParams& params);

/// Throws ConfigError if the widest dilated low kernel does not fit in T.
void check_decomposer_fits(std::size_t levels, std::size_t w_low, std::size_t w_high, std::size_t t_len);

}  // namespace afcn
