// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "afcn/dataio.hpp"
#include "afcn/model.hpp"

namespace afcn {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t patience = 15;
  std::size_t max_epochs = 200;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;      // workers for per-subject forward/backward
  bool parallel_folds = false;  // run CV folds concurrently (uses `threads`)
  ModelConfig model;
  LossConfig losses;

  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// Adam with classic L2 weight decay: g ← g + wd·p before the moment update.
void adam_step(const ParameterRefs& params, std::span<const Tensor> grads, AdamState& state, double lr,
               double weight_decay);

/// AUROC in percent. Binary: Mann–Whitney on the class-1 column with ties
/// counted as 1/2. Multiclass: macro one-vs-rest over classes present in
/// `labels`. nullopt when fewer than two classes are present.
std::optional<double> auroc(const Tensor& scores, std::span<const std::size_t> labels);

/// Softmax probabilities for each logit row of an [n×c] matrix.
Tensor softmax_rows(const Tensor& logits);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double ce = 0.0;
  double div = 0.0;
  double sparse = 0.0;
  double val_acc = 0.0;
  std::optional<double> val_auroc;
};

struct EvalResult {
  double accuracy = 0.0;  // percent
  std::optional<double> auroc;
  Tensor probabilities;   // n×c
};

EvalResult evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                    std::span<const std::size_t> indices);

struct FoldResult {
  std::size_t fold = 0;
  double test_acc = 0.0;
  double test_auroc = 0.0;  // 0 when undefined on the test shard
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
  ModelParams best_params;
};

/// Trains on `split.train`, early-stops on validation AUROC and reports the
/// best-validation checkpoint on `split.test`. The fold seeds everything with
/// config.seed + fold.
FoldResult train_fold(const Dataset& dataset, const FoldSplit& split, std::size_t fold, const TrainConfig& config);

/// Splits with split_kfold(config.folds, fold, config.seed) and trains.
FoldResult train_fold(const Dataset& dataset, std::size_t fold, const TrainConfig& config);

struct CvSummary {
  std::vector<FoldResult> folds;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population
  double mean_auroc = 0.0;
  double std_auroc = 0.0;
};

/// Mean and population standard deviation of fold metrics.
void summarize(CvSummary& summary);

CvSummary run_cv(const Dataset& dataset, const TrainConfig& config);

/// Worker count capped by the AFCN_THREADS environment variable.
std::size_t thread_cap(std::size_t requested);

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochLog> log);
void write_cv_summary_csv(const std::filesystem::path& path, const CvSummary& summary);

}  // namespace afcn
