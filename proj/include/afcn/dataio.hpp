// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "afcn/tensor.hpp"

namespace afcn {

/// One subject: an N×T matrix of ROI signals plus its class label.
struct RoiTimeSeries {
  std::string subject_id;
  Tensor x;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<RoiTimeSeries> subjects;
  std::size_t n_classes = 0;
  std::size_t atlas_size = 0;  // N
  std::size_t t_len = 0;       // T

  std::size_t size() const noexcept { return subjects.size(); }
  std::vector<std::size_t> labels() const;
  /// Throws LoadError when subjects disagree on N/T, a label is out of range,
  /// or some class has no member.
  void validate() const;
};

/// Per-row z-score with population variance. Rows whose variance is at most
/// `eps` become all-zero.
Tensor zscore_rows(const Tensor& x, double eps = 1e-8);

/// Reads a headerless CSV of equally long numeric rows.
Tensor read_matrix_csv(const std::filesystem::path& path);
/// Writes with round-trip precision (%.17g).
void write_matrix_csv(const std::filesystem::path& path, const Tensor& m);

/// Loads a manifest, truncates every subject to `t_len` and z-scores rows.
/// Subjects shorter than `t_len` are rejected.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `dir/manifest.json` plus one CSV per subject under `dir/subjects/`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct FrequencyBand {
  std::string name;
  double lo = 0.0;  // cycles per sample
  double hi = 0.0;
};

/// Bands the generator can plant coupling into, in class order.
const std::vector<FrequencyBand>& plantable_bands();

struct SynthConfig {
  std::size_t n_subjects = 40;
  std::size_t n_roi = 16;
  std::size_t t_len = 128;
  std::size_t n_classes = 2;
  std::uint64_t seed = 0;
  bool balanced = true;
  double noise = 0.5;       // Gaussian σ relative to unit-amplitude components
  std::size_t group_size = 0;  // coupled ROIs; 0 picks max(2, N/4)
};

struct SynthDataset {
  Dataset dataset;
  nlohmann::json ground_truth;
};

/// Subjects are sums of one random-phase sinusoid per plantable band and ROI
/// plus white noise. In class c a fixed ROI group shares a single
/// phase-locked component inside band c instead of independent ones, so
/// per-ROI band power is class-independent and only band-specific coupling
/// carries the label.
SynthDataset synth_band_dataset(const SynthConfig& config);

/// Same as write_dataset plus `dir/ground_truth.json`.
void write_synth_dataset(const SynthDataset& synth, const std::filesystem::path& dir);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Assigns every subject to one of k label-stratified shards: test is shard
/// `fold`, validation is shard `fold + 1 (mod k)`, train is the rest. With
/// k = 2 the validation set is every 4th per-class member of the other shard.
FoldSplit split_kfold(const Dataset& dataset, std::size_t k, std::size_t fold, std::uint64_t seed);

}  // namespace afcn
