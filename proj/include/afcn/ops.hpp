// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "afcn/tape.hpp"

/// Differentiable operations recorded on a Tape. Every op validates shapes
/// and throws DimensionError naming both operands on mismatch.
namespace afcn::ops {

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
/// s · a for a scalar Var s.
Var scale_by(Var a, Var s);
/// Elementwise product with a constant tensor (masks).
Var hadamard(Var a, const Tensor& mask);
/// Adds a length-n bias to each row of an m×n (or length-n) tensor.
Var add_bias(Var a, Var bias);

Var relu(Var a);
Var leaky_relu(Var a, double slope);

Var sum(Var a);
Var mean(Var a);
/// Σ|a| / size(a), subgradient sign(0) = 0.
Var mean_abs(Var a);

Var reshape(Var a, Shape shape);

/// Length-preserving dilated convolution of a [T] signal, or of each row of an
/// [N×T] matrix with one shared kernel. Kernel width must be odd.
Var conv1d(Var signal, Var kernel, std::size_t dilation);

/// Row-wise Pearson correlation of an [N×T] matrix. Rows whose variance is
/// at most `eps` are treated as zero signals (row and column of C are 0).
Var pearson(Var x, double eps = 1e-8);

/// D^{-1/2} A D^{-1/2} with D_ii = Σ_j |A_ij| + eps.
Var normalize_adjacency(Var a, double eps = 1e-6);

/// Vertical concatenation of matrices with a common column count.
Var concat_rows(std::span<const Var> parts);

struct BlockPlacement {
  std::size_t row_block;
  std::size_t col_block;
  Var block;
};

/// Builds a (blocks·n)×(blocks·n) matrix from n×n blocks; unplaced blocks are 0.
Var assemble_blocks(std::size_t blocks, std::size_t n, std::span<const BlockPlacement> placements);

/// Column means of each of `blocks` consecutive row groups: [(blocks·n)×d] → [blocks×d].
Var block_row_mean(Var z, std::size_t blocks);

/// weight · (−log softmax(logits)[label]).
Var cross_entropy(Var logits, std::size_t label, double weight = 1.0);

/// Mean pairwise cosine similarity over the distinct ordered row pairs of
/// an [m×d] matrix. Norms are floored at eps, so zero rows score 0.
Var cosine_diversity(Var h, double eps = 1e-8);

}  // namespace afcn::ops
