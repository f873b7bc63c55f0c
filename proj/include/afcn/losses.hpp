// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "afcn/tape.hpp"

namespace afcn {

struct LossWeights {
  double lambda1 = 0.1;    // diversity
  double lambda2 = 0.001;  // cross-band sparsity
};

/// −log softmax(logits)[label], scaled by `weight`.
Var cross_entropy(Var logits, std::size_t label, double weight = 1.0);

/// Value-only cross entropy of one logit vector.
double cross_entropy(const Tensor& logits, std::size_t label);

/// Mean cosine similarity over ordered pairs of distinct band embeddings.
Var diversity_loss(Var band_embeddings);

/// Mean over cross-band blocks of Σ|block| / N².
Var sparsity_loss(std::span<const Var> cross_blocks);

/// Same, recomputing the blocks from correlations and projections.
Var sparsity_loss(std::span<const Var> corr, std::span<const Var> w_src, std::span<const Var> w_tgt);

/// ce + λ₁·div + λ₂·sparse; absent terms are skipped entirely.
Var total_loss(Var ce, std::optional<Var> div, std::optional<Var> sparse, const LossWeights& weights);
double total_loss(double ce, double div, double sparse, const LossWeights& weights);

}  // namespace afcn
