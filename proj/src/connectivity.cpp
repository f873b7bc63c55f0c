// SPDX-License-Identifier: Apache-2.0
#include "afcn/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "afcn/errors.hpp"
#include "afcn/ops.hpp"

namespace afcn {

ThresholdMode parse_threshold_mode(const std::string& name) {
  if (name == "dynamic") return ThresholdMode::Dynamic;
  if (name == "fixed25" || name == "fixed") return ThresholdMode::FixedTopQ;
  throw ConfigError("unknown threshold mode '" + name + "' (expected dynamic or fixed25)");
}

std::string to_string(ThresholdMode mode) { return mode == ThresholdMode::Dynamic ? "dynamic" : "fixed25"; }

Tensor pearson(const Tensor& band) {
  Tape tape;
  return ops::pearson(tape.constant(band)).value();
}

namespace {

void require_square(const Tensor& corr, const char* what) {
  if (corr.rank() != 2 || corr.rows() != corr.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape_str(corr.shape()));
  }
}

}  // namespace

ThresholdResult dynamic_threshold(const Tensor& corr, double beta) {
  require_square(corr, "dynamic_threshold");
  const std::size_t n = corr.rows();
  ThresholdResult r{Tensor::identity(n), 0.0};
  if (n < 2) return r;
  const double count = static_cast<double>(n * (n - 1));
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) mean += std::abs(corr(i, j));
  mean /= count;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) var += (std::abs(corr(i, j)) - mean) * (std::abs(corr(i, j)) - mean);
  var /= count;
  r.tau = mean + beta * std::sqrt(var);
  // Equal magnitudes: pin τ to that value so rounding in μ cannot admit them.
  double lo = std::abs(corr(0, 1)), hi = lo;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        lo = std::min(lo, std::abs(corr(i, j)));
        hi = std::max(hi, std::abs(corr(i, j)));
      }
  if (lo == hi) r.tau = lo;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && std::abs(corr(i, j)) > r.tau) r.mask(i, j) = 1.0;
  return r;
}

Tensor fixed_threshold_top_q(const Tensor& corr, double q) {
  require_square(corr, "fixed_threshold_top_q");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("top-q fraction must lie in (0, 1)");
  const std::size_t n = corr.rows();
  std::vector<std::tuple<double, std::size_t, std::size_t>> entries;
  entries.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) entries.emplace_back(std::abs(corr(i, j)), i, j);
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  const auto keep = std::min(entries.size(), static_cast<std::size_t>(std::ceil(q * static_cast<double>(entries.size()))));
  Tensor mask = Tensor::identity(n);
  for (std::size_t e = 0; e < keep; ++e) mask(std::get<1>(entries[e]), std::get<2>(entries[e])) = 1.0;
  return mask;
}

ThresholdResult threshold(const Tensor& corr, const ThresholdConfig& config) {
  if (config.mode == ThresholdMode::Dynamic) return dynamic_threshold(corr, config.beta);
  Tensor mask = fixed_threshold_top_q(corr, config.top_q);
  // Report the smallest kept magnitude as the effective cutoff.
  double tau = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < corr.rows(); ++i)
    for (std::size_t j = 0; j < corr.cols(); ++j)
      if (i != j && mask(i, j) != 0.0) {
        tau = any ? std::min(tau, std::abs(corr(i, j))) : std::abs(corr(i, j));
        any = true;
      }
  return {std::move(mask), tau};
}

BandConnectivity band_connectivity(const Tensor& bands, const ThresholdConfig& config) {
  if (bands.rank() != 3) throw DimensionError("band_connectivity expects [B x N x T], got " + shape_str(bands.shape()));
  std::vector<Tensor> corr, masks;
  BandConnectivity out;
  for (std::size_t b = 0; b < bands.dim(0); ++b) {
    corr.push_back(pearson(bands.slab(b)));
    auto t = threshold(corr.back(), config);
    masks.push_back(std::move(t.mask));
    out.thresholds.push_back(t.tau);
  }
  out.corr = stack(corr);
  out.intra_masks = stack(masks);
  return out;
}

Var assemble_intra(std::span<const Var> corr, std::span<const Tensor> masks, bool binary) {
  if (corr.empty() || corr.size() != masks.size()) {
    throw DimensionError("assemble_intra: " + std::to_string(corr.size()) + " correlation blocks vs " +
                         std::to_string(masks.size()) + " masks");
  }
  const std::size_t n = corr[0].value().rows();
  std::vector<ops::BlockPlacement> placements;
  for (std::size_t b = 0; b < corr.size(); ++b) {
    Var block = binary ? corr[b].tape()->constant(masks[b]) : ops::hadamard(corr[b], masks[b]);
    placements.push_back({b, b, block});
  }
  return ops::assemble_blocks(corr.size(), n, placements);
}

CrossBandParams init_cross_params(std::size_t bands, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d < 1) throw ConfigError("cross-band hidden dimension must be >= 1");
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> uni(-bound, bound);
  CrossBandParams p;
  for (std::size_t b = 0; b < bands; ++b) {
    Tensor src(Shape{n, d}), tgt(Shape{n, d});
    for (auto& v : src.data()) v = uni(rng);
    for (auto& v : tgt.data()) v = uni(rng);
    p.w_src.emplace_back("cross.w_src" + std::to_string(b + 1), std::move(src));
    p.w_tgt.emplace_back("cross.w_tgt" + std::to_string(b + 1), std::move(tgt));
  }
  return p;
}

CrossAttention cross_attention(std::span<const Var> corr, std::span<const Var> w_src, std::span<const Var> w_tgt) {
  const std::size_t bands = corr.size();
  if (bands < 2 || w_src.size() != bands || w_tgt.size() != bands) {
    throw ConfigError("cross_attention: need >= 2 bands with one source and one target projection each");
  }
  const std::size_t n = corr[0].value().rows();
  for (std::size_t b = 0; b < bands; ++b) {
    const auto& s = w_src[b].shape();
    const auto& t = w_tgt[b].shape();
    if (s.size() != 2 || s[0] != n || t != s) {
      throw ConfigError("cross_attention: projections must be " + std::to_string(n) + " x d, got " + shape_str(s) +
                        " and " + shape_str(t));
    }
  }
  std::vector<Var> sources, targets;
  for (std::size_t b = 0; b < bands; ++b) {
    sources.push_back(ops::matmul(corr[b], w_src[b]));
    targets.push_back(ops::matmul(corr[b], w_tgt[b]));
  }
  CrossAttention out;
  std::vector<ops::BlockPlacement> placements;
  for (std::size_t s = 0; s < bands; ++s) {
    for (std::size_t m = 0; m < bands; ++m) {
      if (s == m) continue;
      Var block = ops::matmul_nt(sources[s], targets[m]);
      out.blocks.push_back(block);
      placements.push_back({s, m, block});
    }
  }
  out.matrix = ops::assemble_blocks(bands, n, placements);
  return out;
}

}  // namespace afcn
