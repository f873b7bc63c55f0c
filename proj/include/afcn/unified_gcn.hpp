// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afcn/parameter.hpp"
#include "afcn/tape.hpp"

namespace afcn {

/// A_unified = A_intra + λ·A_cross
Var build_unified(Var intra, Var cross, Var lambda);

/// Value-only D^{-1/2} A D^{-1/2} with absolute-value degrees.
Tensor normalize_adjacency(const Tensor& a, double eps = 1e-6);

/// Initial node features: the band correlation matrices stacked row-wise.
Var stack_features(std::span<const Var> corr);

struct GcnParams {
  std::vector<Parameter> weights;  // weights[i]: dims[i] × dims[i+1]
};

/// Glorot-uniform weights for layer widths in_dim → dims[0] → dims[1] ...
GcnParams init_gcn(std::size_t in_dim, std::span<const std::size_t> dims, std::uint64_t seed);

/// H ← ReLU(Â·H·W) per layer; the final layer skips ReLU unless
/// `last_layer_relu`. Â is recomputed from `a_unified` on the tape.
Var gcn_forward(Var a_unified, Var h0, std::span<const Var> weights, bool last_layer_relu = false);

}  // namespace afcn
