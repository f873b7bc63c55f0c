// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afcn/parameter.hpp"
#include "afcn/tape.hpp"

namespace afcn {

/// MLP over the concatenated band embeddings. Hidden layers use ReLU; the
/// output layer is linear.
struct HeadParams {
  struct Layer {
    Parameter weight;  // in × out
    Parameter bias;    // out
  };
  std::vector<Layer> layers;
};

/// dims = {input, hidden..., classes}; weights and biases U(−1/√fan_in, 1/√fan_in).
HeadParams init_head(std::span<const std::size_t> dims, std::uint64_t seed);

/// Per-band mean over node rows: [(B·N)×d] → [B×d].
Var readout(Var z, std::size_t bands);

struct HeadLayerVars {
  Var weight;
  Var bias;
};

/// Logits [c] from band embeddings [B×d], concatenated in band order.
Var classify(Var band_embeddings, std::span<const HeadLayerVars> layers);

}  // namespace afcn
