// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "afcn/connectivity.hpp"
#include "afcn/decomposer.hpp"
#include "afcn/head.hpp"
#include "afcn/losses.hpp"
#include "afcn/parameter.hpp"
#include "afcn/unified_gcn.hpp"

namespace afcn {

struct ModelConfig {
  std::size_t levels = 2;  // K; 0 = no decomposition, raw series as a single band
  std::size_t w_low = 5;
  std::size_t w_high = 3;
  double leaky_slope = 0.01;
  double init_noise = 0.01;
  std::size_t cross_dim = 32;
  std::vector<std::size_t> gcn_dims{64, 64};
  bool last_layer_relu = false;
  std::size_t mlp_hidden = 128;  // 0 = single linear layer
  double lambda_init = 0.1;
  bool intra_binary = false;
  ThresholdConfig threshold;

  // Data shape, filled from the dataset.
  std::size_t n_roi = 0;
  std::size_t t_len = 0;
  std::size_t n_classes = 0;

  std::size_t bands() const noexcept { return levels == 0 ? 1 : 2 * levels; }
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct LossConfig {
  LossWeights weights;
  bool use_div = true;
  bool use_sparse = true;
  bool class_weighted = false;  // inverse class frequency on the CE term
};

struct ModelParams {
  DecomposerParams decomposer;
  CrossBandParams cross;
  std::vector<Parameter> lambda;  // one scalar when cross-band coupling exists
  GcnParams gcn;
  HeadParams head;

  /// Every learnable tensor in a fixed order.
  ParameterRefs refs();
  std::vector<const Parameter*> refs() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double div = 0.0;     // 0 when inactive
  double sparse = 0.0;  // 0 when inactive
};

/// The pipeline recorded on one tape with all parameters bound as vars.
class BoundModel {
 public:
  struct Output {
    Var logits;
    Var embeddings;  // B×d band readouts
    Var intra;
    std::optional<Var> cross;
    Var unified;
    Var ce;
    std::optional<Var> div;
    std::optional<Var> sparse;
    Var total;
    BandConnectivity connectivity;
  };

  BoundModel(Tape& tape, const ModelParams& params, const ModelConfig& config, bool trainable);

  /// Full forward for one subject [N×T]; `label` selects the CE target.
  Output forward(const Tensor& x, std::size_t label, const LossConfig& losses, double ce_weight = 1.0) const;

  /// Adds scale·∂loss/∂p into `grads` (aligned with ModelParams::refs()).
  void accumulate_grads(std::vector<Tensor>& grads, double scale) const;

 private:
  Tape& tape_;
  const ModelConfig& config_;
  std::vector<Var> low_, high_, src_, tgt_, gcn_;
  std::optional<Var> lambda_;
  std::vector<HeadLayerVars> head_;
  std::vector<Var> all_;
};

struct SubjectOutput {
  Tensor logits;
  LossBreakdown loss;
};

SubjectOutput evaluate_subject(const ModelParams& params, const ModelConfig& config, const Tensor& x,
                               std::size_t label, const LossConfig& losses, double ce_weight = 1.0);

/// Forward + backward; adds scale·gradient into `grads`.
SubjectOutput accumulate_subject_gradients(const ModelParams& params, const ModelConfig& config, const Tensor& x,
                                           std::size_t label, const LossConfig& losses, double ce_weight,
                                           double scale, std::vector<Tensor>& grads);

std::vector<Tensor> zero_grads_like(const ModelParams& params);

struct AdjacencyParts {
  Tensor intra;
  Tensor cross;  // zeros when there is no cross-band coupling
  Tensor unified;
};

AdjacencyParts adjacency_parts(const ModelParams& params, const ModelConfig& config, const Tensor& x);

/// Band names in stack order: L1, H1, L2, H2, ... or "raw" without decomposition.
std::vector<std::string> band_names(const ModelConfig& config);

}  // namespace afcn
