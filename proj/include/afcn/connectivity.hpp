// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "afcn/parameter.hpp"
#include "afcn/tape.hpp"

namespace afcn {

enum class ThresholdMode {
  Dynamic,   // τ = μ + β·σ of off-diagonal |C|
  FixedTopQ  // keep the top-q fraction of off-diagonal |C|
};

ThresholdMode parse_threshold_mode(const std::string& name);
std::string to_string(ThresholdMode mode);

struct ThresholdConfig {
  ThresholdMode mode = ThresholdMode::Dynamic;
  double beta = 0.5;
  double top_q = 0.25;
};

struct ThresholdResult {
  Tensor mask;  // N×N of {0,1}, diagonal always 1
  double tau = 0.0;
};

/// Value-only Pearson correlation between rows of an [N×T] matrix.
Tensor pearson(const Tensor& band);

/// Keeps |C_ij| > μ + β·σ, statistics over the N(N−1) off-diagonal entries.
ThresholdResult dynamic_threshold(const Tensor& corr, double beta);

/// Keeps the ⌈q·N(N−1)⌉ largest off-diagonal |C_ij|; ties go to the
/// lexicographically smaller (i, j).
Tensor fixed_threshold_top_q(const Tensor& corr, double q);

ThresholdResult threshold(const Tensor& corr, const ThresholdConfig& config);

/// Per-band correlations, masks and thresholds of a [B×N×T] sub-band stack.
struct BandConnectivity {
  Tensor corr;         // B×N×N
  Tensor intra_masks;  // B×N×N
  std::vector<double> thresholds;
};

BandConnectivity band_connectivity(const Tensor& bands, const ThresholdConfig& config);

/// Block-diagonal direct sum of corr⊙mask (or the binary masks when
/// `binary` is set).
Var assemble_intra(std::span<const Var> corr, std::span<const Tensor> masks, bool binary = false);

/// Band-indexed source and target projections, N×d each.
struct CrossBandParams {
  std::vector<Parameter> w_src;
  std::vector<Parameter> w_tgt;

  std::size_t bands() const noexcept { return w_src.size(); }
};

/// Uniform(−1/√N, 1/√N) entries for `bands` source and target projections.
CrossBandParams init_cross_params(std::size_t bands, std::size_t n, std::size_t d, std::uint64_t seed);

struct CrossAttention {
  Var matrix;               // (B·N)×(B·N), zero diagonal blocks
  std::vector<Var> blocks;  // S^(s)·M^(m)ᵀ for every ordered pair s≠m, row-major over (s, m)
};

/// Bilinear cross-band blocks S^(s)·(M^(m))ᵀ with S^(s) = C^(s)·W_src^(s) and
/// M^(m) = C^(m)·W_tgt^(m).
CrossAttention cross_attention(std::span<const Var> corr, std::span<const Var> w_src, std::span<const Var> w_tgt);

}  // namespace afcn
