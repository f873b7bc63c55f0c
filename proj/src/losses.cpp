// SPDX-License-Identifier: Apache-2.0
#include "afcn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "afcn/connectivity.hpp"
#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

Var cross_entropy(Var logits, std::size_t label, double weight) { return ops::cross_entropy(logits, label, weight); }

double cross_entropy(const Tensor& logits, std::size_t label) {
  Tape tape;
  return ops::cross_entropy(tape.constant(logits), label).value().item();
}

Var diversity_loss(Var band_embeddings) { return ops::cosine_diversity(band_embeddings); }

Var sparsity_loss(std::span<const Var> cross_blocks) {
  if (cross_blocks.empty()) throw ConfigError("sparsity_loss: no cross-band blocks");
  Var acc = ops::mean_abs(cross_blocks[0]);
  for (std::size_t i = 1; i < cross_blocks.size(); ++i) acc = ops::add(acc, ops::mean_abs(cross_blocks[i]));
  return ops::scale(acc, 1.0 / static_cast<double>(cross_blocks.size()));
}

Var sparsity_loss(std::span<const Var> corr, std::span<const Var> w_src, std::span<const Var> w_tgt) {
  const auto attention = cross_attention(corr, w_src, w_tgt);
  return sparsity_loss(attention.blocks);
}

Var total_loss(Var ce, std::optional<Var> div, std::optional<Var> sparse, const LossWeights& weights) {
  if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) throw ConfigError("loss weights must be non-negative");
  Var total = ce;
  if (div && weights.lambda1 > 0.0) total = ops::add(total, ops::scale(*div, weights.lambda1));
  if (sparse && weights.lambda2 > 0.0) total = ops::add(total, ops::scale(*sparse, weights.lambda2));
  return total;
}

double total_loss(double ce, double div, double sparse, const LossWeights& weights) {
  return ce + weights.lambda1 * div + weights.lambda2 * sparse;
}

}  // namespace afcn
