// SPDX-License-Identifier: Apache-2.0
#include "afcn/head.hpp"

#include <cmath>
#include <random>
#include <string>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

HeadParams init_head(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("MLP head needs input and output dims");
  std::mt19937_64 rng(seed);
  HeadParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    Tensor w(Shape{dims[i], dims[i + 1]});
    Tensor b(Shape{dims[i + 1]});
    for (auto& v : w.data()) v = uni(rng);
    for (auto& v : b.data()) v = uni(rng);
    const std::string idx = std::to_string(i + 1);
    p.layers.push_back({Parameter("head.w" + idx, std::move(w)), Parameter("head.b" + idx, std::move(b))});
  }
  return p;
}

Var readout(Var z, std::size_t bands) { return ops::block_row_mean(z, bands); }

Var classify(Var band_embeddings, std::span<const HeadLayerVars> layers) {
  if (layers.empty()) throw ConfigError("MLP head has no layers");
  Var h = ops::reshape(band_embeddings, Shape{1, band_embeddings.value().size()});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = ops::add_bias(ops::matmul(h, layers[i].weight), layers[i].bias);
    if (i + 1 < layers.size()) h = ops::relu(h);
  }
  return ops::reshape(h, Shape{h.value().size()});
}

}  // namespace afcn
