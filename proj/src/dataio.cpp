// SPDX-License-Identifier: Apache-2.0
#include "afcn/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "afcn/errors.hpp"

namespace afcn {
namespace fs = std::filesystem;

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(s.label);
  return out;
}

void Dataset::validate() const {
  if (subjects.empty()) throw LoadError("empty dataset");
  if (atlas_size < 2 || t_len < 8) {
    throw LoadError("dataset needs N >= 2 and T >= 8, got N=" + std::to_string(atlas_size) +
                    " T=" + std::to_string(t_len));
  }
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& s : subjects) {
    if (s.x.shape() != Shape{atlas_size, t_len}) {
      throw LoadError("subject '" + s.subject_id + "' has shape " + shape_str(s.x.shape()) + ", expected " +
                      shape_str(Shape{atlas_size, t_len}));
    }
    if (s.label >= n_classes) {
      throw LoadError("subject '" + s.subject_id + "' has label " + std::to_string(s.label) + " but n_classes is " +
                      std::to_string(n_classes));
    }
    ++counts[s.label];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] == 0) throw LoadError("class " + std::to_string(c) + " has no subjects");
  }
}

Tensor zscore_rows(const Tensor& x, double eps) {
  const std::size_t n = x.rows(), len = x.cols();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t t = 0; t < len; ++t) m += x[i * len + t];
    m /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double c = x[i * len + t] - m;
      var += c * c;
    }
    var /= static_cast<double>(len);
    if (var <= eps) continue;
    const double sd = std::sqrt(var);
    for (std::size_t t = 0; t < len; ++t) out[i * len + t] = (x[i * len + t] - m) / sd;
  }
  return out;
}

Tensor read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      const char* b = p;
      const char* e = comma;
      while (b < e && (*b == ' ' || *b == '\t')) ++b;
      while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (b == e || ec != std::errc() || ptr != e) {
        throw LoadError(path.string() + ": non-numeric cell '" + std::string(b, e) + "' at row " +
                        std::to_string(rows + 1) + ", column " + std::to_string(count + 1));
      }
      data.push_back(v);
      ++count;
      p = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw LoadError(path.string() + ": ragged row " + std::to_string(rows + 1) + " has " + std::to_string(count) +
                      " values, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw LoadError(path.string() + ": no data rows");
  return Tensor(Shape{rows, cols}, std::move(data));
}

void write_matrix_csv(const fs::path& path, const Tensor& m) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  const std::size_t rows = m.rank() == 1 ? 1 : m.dim(0);
  const std::size_t cols = rows ? m.size() / rows : 0;
  char buf[32];
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", m[i * cols + j]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw LoadError("write failed for " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.n_classes = manifest.at("n_classes").get<std::size_t>();
    ds.t_len = manifest.at("t_len").get<std::size_t>();
    const auto& subjects = manifest.at("subjects");
    if (subjects.empty()) throw LoadError("empty dataset");
    const fs::path base = manifest_path.parent_path();
    for (const auto& entry : subjects) {
      RoiTimeSeries s;
      s.subject_id = entry.at("id").get<std::string>();
      s.label = entry.at("label").get<std::size_t>();
      Tensor raw;
      try {
        raw = read_matrix_csv(base / entry.at("path").get<std::string>());
      } catch (const LoadError& e) {
        throw LoadError("subject '" + s.subject_id + "': " + e.what());
      }
      if (raw.cols() < ds.t_len) {
        throw LoadError("subject '" + s.subject_id + "' has " + std::to_string(raw.cols()) +
                        " time points, fewer than t_len=" + std::to_string(ds.t_len));
      }
      if (ds.atlas_size == 0) ds.atlas_size = raw.rows();
      if (raw.rows() != ds.atlas_size) {
        throw LoadError("subject '" + s.subject_id + "' has " + std::to_string(raw.rows()) + " ROIs, expected " +
                        std::to_string(ds.atlas_size));
      }
      Tensor cut(Shape{raw.rows(), ds.t_len});
      for (std::size_t i = 0; i < raw.rows(); ++i)
        for (std::size_t t = 0; t < ds.t_len; ++t) cut(i, t) = raw(i, t);
      s.x = zscore_rows(cut);
      ds.subjects.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("manifest " + manifest_path.string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "subjects");
  nlohmann::json manifest;
  manifest["n_classes"] = dataset.n_classes;
  manifest["t_len"] = dataset.t_len;
  manifest["subjects"] = nlohmann::json::array();
  for (const auto& s : dataset.subjects) {
    const std::string rel = "subjects/" + s.subject_id + ".csv";
    write_matrix_csv(dir / rel, s.x);
    manifest["subjects"].push_back({{"id", s.subject_id}, {"path", rel}, {"label", s.label}});
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw LoadError("cannot write manifest in " + dir.string());
}

const std::vector<FrequencyBand>& plantable_bands() {
  static const std::vector<FrequencyBand> bands{
      {"low", 0.02, 0.06},
      {"high", 0.15, 0.25},
      {"mid", 0.08, 0.12},
  };
  return bands;
}

SynthDataset synth_band_dataset(const SynthConfig& cfg) {
  const auto& bands = plantable_bands();
  if (cfg.n_roi < 4) throw ConfigError("synthetic data needs n_roi >= 4");
  if (cfg.t_len < 64) throw ConfigError("synthetic data needs t_len >= 64");
  if (cfg.n_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (cfg.n_classes > bands.size()) {
    throw ConfigError("n_classes=" + std::to_string(cfg.n_classes) + " exceeds the " + std::to_string(bands.size()) +
                      " plantable frequency bands");
  }
  if (cfg.n_subjects < cfg.n_classes) throw ConfigError("fewer subjects than classes");
  const std::size_t group = cfg.group_size ? cfg.group_size : std::max<std::size_t>(2, cfg.n_roi / 4);
  if (group < 2 || group > cfg.n_roi) throw ConfigError("coupled group size must be in [2, n_roi]");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  SynthDataset out;
  Dataset& ds = out.dataset;
  ds.n_classes = cfg.n_classes;
  ds.atlas_size = cfg.n_roi;
  ds.t_len = cfg.t_len;

  std::vector<std::size_t> labels(cfg.n_subjects);
  if (cfg.balanced) {
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) labels[i] = i % cfg.n_classes;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.n_classes - 1);
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) labels[i] = i < cfg.n_classes ? i : pick(rng);
  }

  auto add_sinusoid = [&](Tensor& x, std::size_t roi, double freq, double phase) {
    for (std::size_t t = 0; t < cfg.t_len; ++t) x(roi, t) += std::sin(two_pi * freq * static_cast<double>(t) + phase);
  };

  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const std::size_t label = labels[s];
    Tensor x(Shape{cfg.n_roi, cfg.t_len});
    for (std::size_t b = 0; b < cfg.n_classes; ++b) {
      const auto& band = bands[b];
      const bool coupled_band = (b == label);
      const double shared_freq = band.lo + (band.hi - band.lo) * unit(rng);
      const double shared_phase = two_pi * unit(rng);
      for (std::size_t roi = 0; roi < cfg.n_roi; ++roi) {
        const double freq = band.lo + (band.hi - band.lo) * unit(rng);
        const double phase = two_pi * unit(rng);
        if (coupled_band && roi < group) {
          add_sinusoid(x, roi, shared_freq, shared_phase);
        } else {
          add_sinusoid(x, roi, freq, phase);
        }
      }
    }
    for (auto& v : x.data()) v += cfg.noise * gauss(rng);

    char id[32];
    std::snprintf(id, sizeof id, "sub-%04zu", s);
    ds.subjects.push_back({id, zscore_rows(x), label});
  }
  ds.validate();

  nlohmann::json truth;
  truth["seed"] = cfg.seed;
  truth["noise"] = cfg.noise;
  truth["coupled_rois"] = nlohmann::json::array();
  for (std::size_t r = 0; r < group; ++r) truth["coupled_rois"].push_back(r);
  truth["classes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    truth["classes"].push_back({{"label", c},
                                {"band", bands[c].name},
                                {"band_lo", bands[c].lo},
                                {"band_hi", bands[c].hi},
                                {"count", static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c))}});
  }
  out.ground_truth = std::move(truth);
  return out;
}

void write_synth_dataset(const SynthDataset& synth, const fs::path& dir) {
  write_dataset(synth.dataset, dir);
  std::ofstream out(dir / "ground_truth.json");
  out << synth.ground_truth.dump(2) << '\n';
  if (!out) throw LoadError("cannot write ground_truth.json in " + dir.string());
}

FoldSplit split_kfold(const Dataset& dataset, std::size_t k, std::size_t fold, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2, got " + std::to_string(k));
  if (fold >= k) throw ConfigError("fold " + std::to_string(fold) + " out of range for k=" + std::to_string(k));
  if (dataset.size() < k) {
    throw ConfigError("cannot split " + std::to_string(dataset.size()) + " subjects into " + std::to_string(k) +
                      " folds");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> shards(k);
  std::size_t offset = 0;
  for (std::size_t c = 0; c < dataset.n_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (dataset.subjects[i].label == c) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    if (!members.empty() && members.size() < k) {
      std::cerr << "warning: class " << c << " has " << members.size() << " members (< k=" << k
                << "); it cannot be stratified across all folds\n";
    }
    for (std::size_t i = 0; i < members.size(); ++i) shards[(offset + i) % k].push_back(members[i]);
    offset = (offset + members.size()) % k;
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());

  FoldSplit split;
  split.test = shards[fold];
  if (k == 2) {
    // No spare shard: hold out every 4th member of each class from the other one.
    std::vector<std::size_t> seen(dataset.n_classes, 0);
    for (auto i : shards[1 - fold]) {
      const auto c = dataset.subjects[i].label;
      (seen[c]++ % 4 == 0 ? split.val : split.train).push_back(i);
    }
    return split;
  }
  split.val = shards[(fold + 1) % k];
  for (std::size_t s = 0; s < k; ++s) {
    if (s == fold || s == (fold + 1) % k) continue;
    split.train.insert(split.train.end(), shards[s].begin(), shards[s].end());
  }
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace afcn
