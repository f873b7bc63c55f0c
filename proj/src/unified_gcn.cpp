// SPDX-License-Identifier: Apache-2.0
#include "afcn/unified_gcn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

Var build_unified(Var intra, Var cross, Var lambda) {
  if (intra.shape() != cross.shape()) {
    throw DimensionError("build_unified: intra " + shape_str(intra.shape()) + " vs cross " + shape_str(cross.shape()));
  }
  return ops::add(intra, ops::scale_by(cross, lambda));
}

Tensor normalize_adjacency(const Tensor& a, double eps) {
  Tape tape;
  return ops::normalize_adjacency(tape.constant(a), eps).value();
}

Var stack_features(std::span<const Var> corr) { return ops::concat_rows(corr); }

GcnParams init_gcn(std::size_t in_dim, std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.empty()) throw ConfigError("GCN needs at least one layer");
  std::mt19937_64 rng(seed);
  GcnParams p;
  std::size_t fan_in = in_dim;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) throw ConfigError("GCN layer width must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + dims[i]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    Tensor w(Shape{fan_in, dims[i]});
    for (auto& v : w.data()) v = uni(rng);
    p.weights.emplace_back("gcn.w" + std::to_string(i + 1), std::move(w));
    fan_in = dims[i];
  }
  return p;
}

Var gcn_forward(Var a_unified, Var h0, std::span<const Var> weights, bool last_layer_relu) {
  if (weights.empty()) throw ConfigError("GCN needs at least one layer");
  const auto& a = a_unified.shape();
  if (a.size() != 2 || a[0] != a[1] || h0.shape().size() != 2 || h0.shape()[0] != a[0]) {
    throw ConfigError("gcn_forward: adjacency " + shape_str(a) + " incompatible with features " +
                      shape_str(h0.shape()));
  }
  Var norm = ops::normalize_adjacency(a_unified);
  Var h = h0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].shape().size() != 2 || weights[i].shape()[0] != h.shape()[1]) {
      throw ConfigError("gcn_forward: layer " + std::to_string(i + 1) + " weight " + shape_str(weights[i].shape()) +
                        " does not accept " + std::to_string(h.shape()[1]) + "-dim input");
    }
    h = ops::matmul(ops::matmul(norm, h), weights[i]);
    if (i + 1 < weights.size() || last_layer_relu) h = ops::relu(h);
  }
  return h;
}

}  // namespace afcn
