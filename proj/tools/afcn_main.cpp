// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "afcn/checkpoint.hpp"
#include "afcn/config.hpp"
#include "afcn/dataio.hpp"
#include "afcn/errors.hpp"
#include "afcn/model.hpp"
#include "afcn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace afcn;

namespace {

// "n=40,N=16,T=128,c=2[,seed=..,noise=..]"
SynthConfig parse_synthetic(const std::string& desc) {
  SynthConfig s;
  std::stringstream in(desc);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--synthetic item '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    try {
      if (key == "n") s.n_subjects = std::stoul(val);
      else if (key == "N") s.n_roi = std::stoul(val);
      else if (key == "T") s.t_len = std::stoul(val);
      else if (key == "c") s.n_classes = std::stoul(val);
      else if (key == "seed") s.seed = std::stoull(val);
      else if (key == "noise") s.noise = std::stod(val);
      else if (key == "group") s.group_size = std::stoul(val);
      else throw ConfigError("unknown --synthetic key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("--synthetic value '" + item + "' is not a number");
    }
  }
  return s;
}

struct DataSource {
  std::string manifest;
  std::string synthetic;

  bool empty() const { return manifest.empty() && synthetic.empty(); }
  json to_json() const {
    if (!manifest.empty()) return {{"manifest", fs::absolute(manifest).string()}};
    return {{"synthetic", synthetic}};
  }
  Dataset load() const {
    if (!manifest.empty() && !synthetic.empty()) throw UsageError("give either --manifest or --synthetic, not both");
    if (!manifest.empty()) return load_dataset(manifest);
    if (!synthetic.empty()) return synth_band_dataset(parse_synthetic(synthetic)).dataset;
    throw UsageError("no dataset: pass --manifest or --synthetic");
  }
};

void add_data_options(CLI::App* cmd, DataSource& src) {
  cmd->add_option("--manifest", src.manifest, "Dataset manifest JSON");
  cmd->add_option("--synthetic", src.synthetic, "Synthetic dataset, e.g. n=40,N=16,T=128,c=2");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

void require_shape(const ModelConfig& m, const Dataset& ds) {
  if (m.n_roi != ds.atlas_size || m.t_len != ds.t_len || m.n_classes != ds.n_classes) {
    throw ConfigError("dataset shape N=" + std::to_string(ds.atlas_size) + " T=" + std::to_string(ds.t_len) +
                      " c=" + std::to_string(ds.n_classes) + " does not match checkpoint N=" +
                      std::to_string(m.n_roi) + " T=" + std::to_string(m.t_len) +
                      " c=" + std::to_string(m.n_classes));
  }
}

struct TrainArgs {
  DataSource data;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> folds, max_epochs, fold;
  std::optional<std::uint64_t> seed;
  std::string out = "afcn_run";
};

int cmd_train(const TrainArgs& a) {
  json cfg_json = to_json(TrainConfig{});
  DataSource data = a.data;
  if (!a.config_path.empty()) {
    json file = read_json_file(a.config_path);
    if (file.contains("data")) {
      if (data.empty()) {
        data.manifest = file["data"].value("manifest", "");
        data.synthetic = file["data"].value("synthetic", "");
      }
      file.erase("data");
    }
    train_config_from_json(file);
    cfg_json.merge_patch(file);
  }
  for (const auto& o : a.overrides) apply_override(cfg_json, o);
  if (a.folds) cfg_json["train"]["folds"] = *a.folds;
  if (a.max_epochs) cfg_json["train"]["max_epochs"] = *a.max_epochs;
  if (a.seed) cfg_json["train"]["seed"] = *a.seed;
  TrainConfig cfg = train_config_from_json(cfg_json);

  const Dataset ds = data.load();
  cfg.model.n_roi = ds.atlas_size;
  cfg.model.t_len = ds.t_len;
  cfg.model.n_classes = ds.n_classes;
  cfg.validate();
  if (a.fold && *a.fold >= cfg.folds) throw ConfigError("--fold must be below the fold count");

  const fs::path out(a.out);
  fs::create_directories(out);
  json resolved = to_json(cfg);
  resolved["data"] = data.to_json();
  write_json_file(out / "resolved_config.json", resolved);

  CvSummary summary;
  if (a.fold) {
    summary.folds.push_back(train_fold(ds, *a.fold, cfg));
    summarize(summary);
  } else {
    summary = run_cv(ds, cfg);
  }
  for (const auto& f : summary.folds) {
    const fs::path dir = out / ("fold_" + std::to_string(f.fold));
    fs::create_directories(dir);
    write_metrics_csv(dir / "metrics.csv", f.log);
    save_checkpoint(dir / "checkpoint.bin", f.best_params, cfg.model);
  }
  write_cv_summary_csv(out / "cv_summary.csv", summary);
  std::printf("accuracy %.2f +- %.2f  auroc %.2f +- %.2f  (%zu folds) -> %s\n", summary.mean_acc, summary.std_acc,
              summary.mean_auroc, summary.std_auroc, summary.folds.size(), out.string().c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const DataSource& data, const std::string& out) {
  const auto [model, params] = restore_model(load_checkpoint(checkpoint));
  const Dataset ds = data.load();
  require_shape(model, ds);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto r = evaluate(params, model, ds, all);
  if (!out.empty()) {
    std::ofstream f(out);
    f << "subject_id,label";
    for (std::size_t c = 0; c < ds.n_classes; ++c) f << ",p" << c;
    f << '\n';
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      f << ds.subjects[i].subject_id << ',' << ds.subjects[i].label;
      for (std::size_t c = 0; c < ds.n_classes; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", r.probabilities(i, c));
        f << ',' << buf;
      }
      f << '\n';
    }
    if (!f) throw Error("cannot write " + out);
  }
  if (r.auroc)
    std::printf("accuracy %.2f  auroc %.2f  (%zu subjects)\n", r.accuracy, *r.auroc, ds.size());
  else
    std::printf("accuracy %.2f  auroc undefined  (%zu subjects)\n", r.accuracy, ds.size());
  return 0;
}

struct DecomposeArgs {
  std::string input, checkpoint, out;
  bool init_only = false;
  std::size_t levels = 2, w_low = 5, w_high = 3;
  double init_noise = 0.01;
  std::uint64_t seed = 0;
};

int cmd_decompose(const DecomposeArgs& a) {
  const Tensor x = zscore_rows(read_matrix_csv(a.input));
  DecomposerParams dec;
  if (a.init_only == !a.checkpoint.empty()) throw UsageError("give exactly one of --checkpoint or --init-only");
  if (a.init_only) {
    check_decomposer_fits(a.levels, a.w_low, a.w_high, x.cols());
    dec = init_decomposer(a.levels, a.w_low, a.w_high, a.seed, a.init_noise);
  } else {
    auto [model, params] = restore_model(load_checkpoint(a.checkpoint));
    if (x.cols() != model.t_len) {
      throw ConfigError("input has T=" + std::to_string(x.cols()) + " but the checkpoint expects T=" +
                        std::to_string(model.t_len));
    }
    if (x.rows() != model.n_roi) {
      throw ConfigError("input has N=" + std::to_string(x.rows()) + " but the checkpoint expects N=" +
                        std::to_string(model.n_roi));
    }
    if (model.levels == 0) throw ConfigError("checkpoint has no decomposer (K=0)");
    dec = std::move(params.decomposer);
  }
  const Tensor bands = decompose(x, dec);
  write_matrix_csv(a.out, bands.reshaped(Shape{bands.dim(0) * bands.dim(1), bands.dim(2)}));
  return 0;
}

int cmd_export(const std::string& checkpoint, const DataSource& data, const std::string& out_dir) {
  const auto [model, params] = restore_model(load_checkpoint(checkpoint));
  const Dataset ds = data.load();
  require_shape(model, ds);
  const std::size_t n = model.n_roi, m = model.bands() * n;
  std::map<std::size_t, std::pair<Tensor, std::size_t>> groups;
  for (const auto& s : ds.subjects) {
    auto& [sum, count] = groups.try_emplace(s.label, Tensor(Shape{m, m}), 0).first->second;
    const Tensor a = adjacency_parts(params, model, s.x).unified;
    for (std::size_t i = 0; i < a.size(); ++i) sum[i] += a[i];
    ++count;
  }
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  for (auto& [label, g] : groups) {
    for (auto& v : g.first.data()) v /= static_cast<double>(g.second);
    write_matrix_csv(dir / ("adjacency_label" + std::to_string(label) + ".csv"), g.first);
  }
  std::ofstream legend(dir / "legend.csv");
  legend << "band,row_start,row_end\n";
  const auto names = band_names(model);
  for (std::size_t b = 0; b < names.size(); ++b) legend << names[b] << ',' << b * n << ',' << (b + 1) * n << '\n';
  if (!legend) throw Error("cannot write legend in " + dir.string());
  return 0;
}

int cmd_synth(const std::string& desc, const std::string& out) {
  write_synth_dataset(synth_band_dataset(parse_synthetic(desc)), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive frequency-band functional connectivity networks"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Cross-validated training");
  add_data_options(tr, train.data);
  tr->add_option("--config", train.config_path, "JSON config file");
  tr->add_option("--set", train.overrides, "Override, e.g. losses.lambda1=0 (repeatable)");
  tr->add_option("--folds", train.folds, "Number of CV folds");
  tr->add_option("--fold", train.fold, "Train only this fold");
  tr->add_option("--max-epochs", train.max_epochs, "Epoch cap");
  tr->add_option("--seed", train.seed, "Base seed");
  tr->add_option("--out", train.out, "Output directory");

  std::string ck, out;
  DataSource data;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("--checkpoint", ck, "Checkpoint file")->required();
  add_data_options(ev, data);
  ev->add_option("--out", out, "Per-subject probability CSV");

  DecomposeArgs dec;
  auto* dc = app.add_subcommand("decompose", "Write the sub-band stack of one subject");
  dc->add_option("--input", dec.input, "Subject CSV (N rows x T columns)")->required();
  dc->add_option("--checkpoint", dec.checkpoint, "Use trained filters");
  dc->add_flag("--init-only", dec.init_only, "Use freshly initialized filters");
  dc->add_option("--levels", dec.levels, "Decomposition levels for --init-only");
  dc->add_option("--w-low", dec.w_low, "Low-pass width for --init-only");
  dc->add_option("--w-high", dec.w_high, "High-pass width for --init-only");
  dc->add_option("--init-noise", dec.init_noise, "Init noise for --init-only");
  dc->add_option("--seed", dec.seed, "Init seed for --init-only");
  dc->add_option("--out", dec.out, "Output CSV")->required();

  std::string ex_ck, ex_out;
  DataSource ex_data;
  auto* ex = app.add_subcommand("export-adjacency", "Group-averaged unified adjacency per label");
  ex->add_option("--checkpoint", ex_ck, "Checkpoint file")->required();
  add_data_options(ex, ex_data);
  ex->add_option("--out", ex_out, "Output directory")->required();

  std::string syn_desc, syn_out;
  auto* sy = app.add_subcommand("synth", "Write a synthetic dataset");
  sy->add_option("--synthetic", syn_desc, "Synthetic dataset, e.g. n=40,N=16,T=128,c=2,seed=0")->required();
  sy->add_option("--out", syn_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*tr) return cmd_train(train);
    if (*ev) return cmd_eval(ck, data, out);
    if (*dc) return cmd_decompose(dec);
    if (*ex) return cmd_export(ex_ck, ex_data, ex_out);
    if (*sy) return cmd_synth(syn_desc, syn_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
