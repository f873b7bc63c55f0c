// SPDX-License-Identifier: Apache-2.0
#include "afcn/model.hpp"

#include <random>
#include <string>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

void ModelConfig::validate() const {
  if (n_roi < 2) throw ConfigError("model needs n_roi >= 2");
  if (t_len < 8) throw ConfigError("model needs t_len >= 8");
  if (n_classes < 2) throw ConfigError("model needs at least 2 classes");
  if (levels > 0) check_decomposer_fits(levels, w_low, w_high, t_len);
  if (cross_dim < 1) throw ConfigError("cross-band hidden dimension must be >= 1");
  if (gcn_dims.empty()) throw ConfigError("GCN needs at least one layer");
  for (auto d : gcn_dims)
    if (d == 0) throw ConfigError("GCN layer width must be positive");
  if (threshold.mode == ThresholdMode::FixedTopQ && !(threshold.top_q > 0.0 && threshold.top_q < 1.0)) {
    throw ConfigError("top-q fraction must lie in (0, 1)");
  }
}

ParameterRefs ModelParams::refs() {
  ParameterRefs out;
  for (auto& p : decomposer.low) out.push_back(&p);
  for (auto& p : decomposer.high) out.push_back(&p);
  for (auto& p : cross.w_src) out.push_back(&p);
  for (auto& p : cross.w_tgt) out.push_back(&p);
  for (auto& p : lambda) out.push_back(&p);
  for (auto& p : gcn.weights) out.push_back(&p);
  for (auto& l : head.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> ModelParams::refs() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<ModelParams*>(this)->refs()) out.push_back(p);
  return out;
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 master(seed);
  const std::uint64_t s_dec = master(), s_cross = master(), s_gcn = master(), s_head = master();

  ModelParams p;
  const std::size_t bands = config.bands();
  if (config.levels > 0) {
    p.decomposer = init_decomposer(config.levels, config.w_low, config.w_high, s_dec, config.init_noise,
                                   config.leaky_slope);
  } else {
    p.decomposer.leaky_slope = config.leaky_slope;
  }
  if (bands >= 2) {
    p.cross = init_cross_params(bands, config.n_roi, config.cross_dim, s_cross);
    p.lambda.emplace_back("lambda", Tensor::scalar(config.lambda_init));
  }
  p.gcn = init_gcn(config.n_roi, config.gcn_dims, s_gcn);
  std::vector<std::size_t> head_dims{bands * config.gcn_dims.back()};
  if (config.mlp_hidden > 0) head_dims.push_back(config.mlp_hidden);
  head_dims.push_back(config.n_classes);
  p.head = init_head(head_dims, s_head);
  return p;
}

BoundModel::BoundModel(Tape& tape, const ModelParams& params, const ModelConfig& config, bool trainable)
    : tape_(tape), config_(config) {
  auto bind = [&](const Parameter& p) {
    Var v = trainable ? tape_.parameter(p.value) : tape_.constant(p.value);
    all_.push_back(v);
    return v;
  };
  // Binding order mirrors ModelParams::refs().
  for (const auto& p : params.decomposer.low) low_.push_back(bind(p));
  for (const auto& p : params.decomposer.high) high_.push_back(bind(p));
  for (const auto& p : params.cross.w_src) src_.push_back(bind(p));
  for (const auto& p : params.cross.w_tgt) tgt_.push_back(bind(p));
  for (const auto& p : params.lambda) lambda_ = bind(p);
  for (const auto& p : params.gcn.weights) gcn_.push_back(bind(p));
  for (const auto& l : params.head.layers) {
    Var w = bind(l.weight);
    Var b = bind(l.bias);
    head_.push_back({w, b});
  }
}

BoundModel::Output BoundModel::forward(const Tensor& x, std::size_t label, const LossConfig& losses,
                                       double ce_weight) const {
  if (x.shape() != Shape{config_.n_roi, config_.t_len}) {
    throw DimensionError("model expects subject of shape " + shape_str(Shape{config_.n_roi, config_.t_len}) +
                         ", got " + shape_str(x.shape()));
  }
  Output out;
  Var input = tape_.constant(x);
  std::vector<Var> bands =
      config_.levels == 0 ? std::vector<Var>{input} : decompose(input, low_, high_, config_.leaky_slope);

  std::vector<Var> corr;
  std::vector<Tensor> masks, corr_values;
  for (const Var& b : bands) {
    corr.push_back(ops::pearson(b));
    auto t = threshold(corr.back().value(), config_.threshold);
    corr_values.push_back(corr.back().value());
    masks.push_back(std::move(t.mask));
    out.connectivity.thresholds.push_back(t.tau);
  }
  out.connectivity.corr = stack(corr_values);
  out.connectivity.intra_masks = stack(masks);

  out.intra = assemble_intra(corr, masks, config_.intra_binary);
  out.unified = out.intra;
  std::vector<Var> blocks;
  if (bands.size() >= 2) {
    auto attention = cross_attention(corr, src_, tgt_);
    out.cross = attention.matrix;
    blocks = std::move(attention.blocks);
    out.unified = build_unified(out.intra, attention.matrix, *lambda_);
  }

  Var h0 = stack_features(corr);
  Var z = gcn_forward(out.unified, h0, gcn_, config_.last_layer_relu);
  out.embeddings = readout(z, bands.size());
  out.logits = classify(out.embeddings, head_);

  out.ce = cross_entropy(out.logits, label, ce_weight);
  if (losses.use_div && losses.weights.lambda1 > 0.0 && bands.size() >= 2) out.div = diversity_loss(out.embeddings);
  if (losses.use_sparse && losses.weights.lambda2 > 0.0 && !blocks.empty()) out.sparse = sparsity_loss(blocks);
  out.total = total_loss(out.ce, out.div, out.sparse, losses.weights);
  return out;
}

void BoundModel::accumulate_grads(std::vector<Tensor>& grads, double scale) const {
  if (grads.size() != all_.size()) throw UsageError("gradient buffer count does not match the model");
  for (std::size_t i = 0; i < all_.size(); ++i) {
    const Tensor g = all_[i].grad();
    for (std::size_t j = 0; j < g.size(); ++j) grads[i][j] += scale * g[j];
  }
}

namespace {

LossBreakdown breakdown(const BoundModel::Output& out) {
  LossBreakdown l;
  l.total = out.total.value().item();
  l.ce = out.ce.value().item();
  if (out.div) l.div = out.div->value().item();
  if (out.sparse) l.sparse = out.sparse->value().item();
  return l;
}

}  // namespace

SubjectOutput evaluate_subject(const ModelParams& params, const ModelConfig& config, const Tensor& x,
                               std::size_t label, const LossConfig& losses, double ce_weight) {
  Tape tape;
  BoundModel model(tape, params, config, false);
  auto out = model.forward(x, label, losses, ce_weight);
  return {out.logits.value(), breakdown(out)};
}

SubjectOutput accumulate_subject_gradients(const ModelParams& params, const ModelConfig& config, const Tensor& x,
                                           std::size_t label, const LossConfig& losses, double ce_weight,
                                           double scale, std::vector<Tensor>& grads) {
  Tape tape;
  BoundModel model(tape, params, config, true);
  auto out = model.forward(x, label, losses, ce_weight);
  tape.backward(out.total);
  model.accumulate_grads(grads, scale);
  return {out.logits.value(), breakdown(out)};
}

std::vector<Tensor> zero_grads_like(const ModelParams& params) {
  std::vector<Tensor> g;
  for (const auto* p : params.refs()) g.emplace_back(p->value.shape());
  return g;
}

AdjacencyParts adjacency_parts(const ModelParams& params, const ModelConfig& config, const Tensor& x) {
  Tape tape;
  BoundModel model(tape, params, config, false);
  LossConfig none;
  none.use_div = false;
  none.use_sparse = false;
  auto out = model.forward(x, 0, none);
  AdjacencyParts parts;
  parts.intra = out.intra.value();
  parts.cross = out.cross ? out.cross->value() : Tensor(parts.intra.shape());
  parts.unified = out.unified.value();
  return parts;
}

std::vector<std::string> band_names(const ModelConfig& config) {
  if (config.levels == 0) return {"raw"};
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= config.levels; ++k) {
    names.push_back("L" + std::to_string(k));
    names.push_back("H" + std::to_string(k));
  }
  return names;
}

}  // namespace afcn
