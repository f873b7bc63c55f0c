// SPDX-License-Identifier: Apache-2.0
#include "afcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "afcn/errors.hpp"

namespace afcn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  if (losses.weights.lambda1 < 0.0 || losses.weights.lambda2 < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  model.validate();
}

void adam_step(const ParameterRefs& params, std::span<const Tensor> grads, AdamState& state, double lr,
               double weight_decay) {
  if (grads.size() != params.size()) throw UsageError("adam_step: gradient count does not match parameters");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i]->value;
    const Tensor& g = grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] + weight_decay * w[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

namespace {

// Mann–Whitney AUROC in [0, 1] via midranks.
double binary_auc(std::span<const double> scores, std::span<const char> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace

std::optional<double> auroc(const Tensor& scores, std::span<const std::size_t> labels) {
  if (scores.rank() != 2 || scores.rows() != labels.size()) {
    throw DimensionError("auroc: scores " + shape_str(scores.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const std::size_t n = labels.size(), c = scores.cols();
  if (c < 2) throw DimensionError("auroc needs at least 2 score columns");
  std::vector<std::size_t> counts(c, 0);
  for (auto l : labels) {
    if (l >= c) throw UsageError("auroc: label " + std::to_string(l) + " out of range");
    ++counts[l];
  }
  const auto present = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto k) { return k > 0; }));
  if (present < 2) return std::nullopt;

  std::vector<double> col(n);
  std::vector<char> pos(n);
  auto one_vs_rest = [&](std::size_t cls) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = scores(i, cls);
      pos[i] = labels[i] == cls;
    }
    return binary_auc(col, pos);
  };
  if (c == 2) return 100.0 * one_vs_rest(1);
  double acc = 0.0;
  for (std::size_t cls = 0; cls < c; ++cls)
    if (counts[cls] > 0) acc += one_vs_rest(cls);
  return 100.0 * acc / static_cast<double>(present);
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  const std::size_t n = logits.rows(), c = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(logits[i * c + j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  return out;
}

std::size_t thread_cap(std::size_t requested) {
  std::size_t n = std::max<std::size_t>(1, requested);
  if (const char* env = std::getenv("AFCN_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

namespace {

// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
// handled by exactly one thread; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<double> class_weights(const Dataset& ds, std::span<const std::size_t> train, bool enabled) {
  std::vector<double> w(ds.n_classes, 1.0);
  if (!enabled) return w;
  std::vector<std::size_t> counts(ds.n_classes, 0);
  for (auto i : train) ++counts[ds.subjects[i].label];
  for (std::size_t c = 0; c < ds.n_classes; ++c) {
    if (counts[c] > 0) {
      w[c] = static_cast<double>(train.size()) / (static_cast<double>(ds.n_classes) * static_cast<double>(counts[c]));
    }
  }
  return w;
}

ModelConfig with_data_shape(ModelConfig m, const Dataset& ds) {
  m.n_roi = ds.atlas_size;
  m.t_len = ds.t_len;
  m.n_classes = ds.n_classes;
  return m;
}

void copy_values(ModelParams& dst, const ModelParams& src) {
  auto d = dst.refs();
  auto s = src.refs();
  for (std::size_t i = 0; i < d.size(); ++i) d[i]->value = s[i]->value;
}

}  // namespace

EvalResult evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                    std::span<const std::size_t> indices) {
  EvalResult r;
  const std::size_t c = config.n_classes;
  Tensor logits(Shape{indices.size(), c});
  std::vector<std::size_t> labels;
  LossConfig plain;
  plain.use_div = plain.use_sparse = false;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = dataset.subjects[indices[k]];
    const auto out = evaluate_subject(params, config, s.x, s.label, plain);
    std::size_t arg = 0;
    for (std::size_t j = 0; j < c; ++j) {
      logits(k, j) = out.logits[j];
      if (out.logits[j] > out.logits[arg]) arg = j;
    }
    if (arg == s.label) ++correct;
    labels.push_back(s.label);
  }
  r.accuracy = indices.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
  r.probabilities = softmax_rows(logits);
  if (!indices.empty()) r.auroc = auroc(r.probabilities, labels);
  return r;
}

FoldResult train_fold(const Dataset& dataset, const FoldSplit& split, std::size_t fold, const TrainConfig& config) {
  const ModelConfig model_cfg = with_data_shape(config.model, dataset);
  TrainConfig checked = config;
  checked.model = model_cfg;
  checked.validate();
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw ConfigError("fold " + std::to_string(fold) + " has an empty train/val/test shard");
  }
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (auto i : *part)
      if (i >= dataset.size()) throw ConfigError("split index " + std::to_string(i) + " outside the dataset");

  const std::uint64_t fold_seed = config.seed + fold;
  FoldResult result;
  result.fold = fold;
  ModelParams params = init_model(model_cfg, fold_seed);
  result.best_params = params;
  AdamState adam;
  std::mt19937_64 shuffle_rng(fold_seed ^ 0x9E3779B97F4A7C15ULL);
  const auto ce_weights = class_weights(dataset, split.train, config.losses.class_weighted);
  const std::size_t workers = thread_cap(config.threads);
  auto refs = params.refs();

  std::optional<double> best_auroc;
  std::size_t stale = 0;
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog row;
    row.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t count = end - start;
      const double scale = 1.0 / static_cast<double>(count);
      std::vector<std::vector<Tensor>> per_subject(count);
      std::vector<LossBreakdown> losses(count);
      parallel_for(count, workers, [&](std::size_t b) {
        const auto& s = dataset.subjects[order[start + b]];
        per_subject[b] = zero_grads_like(params);
        losses[b] = accumulate_subject_gradients(params, model_cfg, s.x, s.label, config.losses,
                                                 ce_weights[s.label], scale, per_subject[b])
                        .loss;
      });
      std::vector<Tensor> grads = zero_grads_like(params);
      for (std::size_t b = 0; b < count; ++b) {
        for (std::size_t i = 0; i < grads.size(); ++i)
          for (std::size_t j = 0; j < grads[i].size(); ++j) grads[i][j] += per_subject[b][i][j];
        row.train_loss += losses[b].total;
        row.ce += losses[b].ce;
        row.div += losses[b].div;
        row.sparse += losses[b].sparse;
      }
      adam_step(refs, grads, adam, config.lr, config.weight_decay);
    }
    const double n = static_cast<double>(order.size());
    row.train_loss /= n;
    row.ce /= n;
    row.div /= n;
    row.sparse /= n;

    const auto val = evaluate(params, model_cfg, dataset, split.val);
    row.val_acc = val.accuracy;
    row.val_auroc = val.auroc;
    result.log.push_back(row);

    if (val.auroc) {
      if (!best_auroc || *val.auroc > *best_auroc) {
        best_auroc = val.auroc;
        result.best_epoch = epoch;
        copy_values(result.best_params, params);
        stale = 0;
      } else if (++stale >= config.patience) {
        break;
      }
    }
  }

  const auto test = evaluate(result.best_params, model_cfg, dataset, split.test);
  result.test_acc = test.accuracy;
  result.test_auroc = test.auroc.value_or(0.0);
  return result;
}

FoldResult train_fold(const Dataset& dataset, std::size_t fold, const TrainConfig& config) {
  return train_fold(dataset, split_kfold(dataset, config.folds, fold, config.seed), fold, config);
}

void summarize(CvSummary& s) {
  const double n = static_cast<double>(s.folds.size());
  if (s.folds.empty()) return;
  s.mean_acc = s.mean_auroc = 0.0;
  for (const auto& f : s.folds) {
    s.mean_acc += f.test_acc;
    s.mean_auroc += f.test_auroc;
  }
  s.mean_acc /= n;
  s.mean_auroc /= n;
  double va = 0.0, vu = 0.0;
  for (const auto& f : s.folds) {
    va += (f.test_acc - s.mean_acc) * (f.test_acc - s.mean_acc);
    vu += (f.test_auroc - s.mean_auroc) * (f.test_auroc - s.mean_auroc);
  }
  s.std_acc = std::sqrt(va / n);
  s.std_auroc = std::sqrt(vu / n);
}

CvSummary run_cv(const Dataset& dataset, const TrainConfig& config) {
  CvSummary summary;
  summary.folds.resize(config.folds);
  std::vector<FoldSplit> splits;
  for (std::size_t f = 0; f < config.folds; ++f) splits.push_back(split_kfold(dataset, config.folds, f, config.seed));

  TrainConfig inner = config;
  std::size_t fold_workers = 1;
  if (config.parallel_folds) {
    fold_workers = thread_cap(config.threads);
    inner.threads = 1;
  }
  parallel_for(config.folds, fold_workers, [&](std::size_t f) {
    try {
      summary.folds[f] = train_fold(dataset, splits[f], f, inner);
    } catch (const ConfigError& e) {
      throw ConfigError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  });
  summarize(summary);
  return summary;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochLog> log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,ce,div,sparse,val_acc,val_auroc\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.ce) << ',' << fmt(r.div) << ',' << fmt(r.sparse)
        << ',' << fmt(r.val_acc) << ',' << (r.val_auroc ? fmt(*r.val_auroc) : std::string("nan")) << '\n';
  }
}

void write_cv_summary_csv(const std::filesystem::path& path, const CvSummary& summary) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "fold,test_acc,test_auroc,best_epoch\n";
  for (const auto& f : summary.folds) {
    out << f.fold << ',' << fmt(f.test_acc) << ',' << fmt(f.test_auroc) << ',' << f.best_epoch << '\n';
  }
  out << "mean," << fmt(summary.mean_acc) << ',' << fmt(summary.mean_auroc) << ",\n";
  out << "std," << fmt(summary.std_acc) << ',' << fmt(summary.std_auroc) << ",\n";
}

}  // namespace afcn
