// SPDX-License-Identifier: Apache-2.0
#include "afcn/config.hpp"

#include <string>
#include <vector>

#include "afcn/errors.hpp"

namespace afcn {
using nlohmann::json;

json to_json(const TrainConfig& c) {
  json j;
  j["model"] = {
      {"K", c.model.levels},
      {"w_low", c.model.w_low},
      {"w_high", c.model.w_high},
      {"leaky_slope", c.model.leaky_slope},
      {"init_noise", c.model.init_noise},
      {"cross_dim", c.model.cross_dim},
      {"gcn_dims", c.model.gcn_dims},
      {"last_layer_relu", c.model.last_layer_relu},
      {"mlp_hidden", c.model.mlp_hidden},
      {"lambda_init", c.model.lambda_init},
  };
  j["connectivity"] = {
      {"dt_mode", to_string(c.model.threshold.mode)},
      {"beta", c.model.threshold.beta},
      {"top_q", c.model.threshold.top_q},
      {"intra_binary", c.model.intra_binary},
  };
  j["losses"] = {
      {"lambda1", c.losses.weights.lambda1},
      {"lambda2", c.losses.weights.lambda2},
      {"use_div", c.losses.use_div},
      {"use_sparse", c.losses.use_sparse},
      {"class_weighted", c.losses.class_weighted},
  };
  j["train"] = {
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"batch_size", c.batch_size},
      {"patience", c.patience},
      {"max_epochs", c.max_epochs},
      {"folds", c.folds},
      {"seed", c.seed},
      {"threads", c.threads},
      {"parallel_folds", c.parallel_folds},
  };
  return j;
}

namespace {

template <typename T>
void read(const json& section, const char* key, T& dst, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    dst = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key " + where + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, const json& defaults) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [section, body] : j.items()) {
    if (!defaults.contains(section)) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!defaults[section].contains(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
    }
  }
}

}  // namespace

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  reject_unknown(j, to_json(c));
  const json empty = json::object();
  const json& m = j.contains("model") ? j["model"] : empty;
  read(m, "K", c.model.levels, "model");
  read(m, "w_low", c.model.w_low, "model");
  read(m, "w_high", c.model.w_high, "model");
  read(m, "leaky_slope", c.model.leaky_slope, "model");
  read(m, "init_noise", c.model.init_noise, "model");
  read(m, "cross_dim", c.model.cross_dim, "model");
  read(m, "gcn_dims", c.model.gcn_dims, "model");
  read(m, "last_layer_relu", c.model.last_layer_relu, "model");
  read(m, "mlp_hidden", c.model.mlp_hidden, "model");
  read(m, "lambda_init", c.model.lambda_init, "model");

  const json& cn = j.contains("connectivity") ? j["connectivity"] : empty;
  std::string mode = to_string(c.model.threshold.mode);
  read(cn, "dt_mode", mode, "connectivity");
  c.model.threshold.mode = parse_threshold_mode(mode);
  read(cn, "beta", c.model.threshold.beta, "connectivity");
  read(cn, "top_q", c.model.threshold.top_q, "connectivity");
  read(cn, "intra_binary", c.model.intra_binary, "connectivity");

  const json& l = j.contains("losses") ? j["losses"] : empty;
  read(l, "lambda1", c.losses.weights.lambda1, "losses");
  read(l, "lambda2", c.losses.weights.lambda2, "losses");
  read(l, "use_div", c.losses.use_div, "losses");
  read(l, "use_sparse", c.losses.use_sparse, "losses");
  read(l, "class_weighted", c.losses.class_weighted, "losses");

  const json& t = j.contains("train") ? j["train"] : empty;
  read(t, "lr", c.lr, "train");
  read(t, "weight_decay", c.weight_decay, "train");
  read(t, "batch_size", c.batch_size, "train");
  read(t, "patience", c.patience, "train");
  read(t, "max_epochs", c.max_epochs, "train");
  read(t, "folds", c.folds, "train");
  read(t, "seed", c.seed, "train");
  read(t, "threads", c.threads, "train");
  read(t, "parallel_folds", c.parallel_folds, "train");
  return c;
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  const json defaults = to_json(TrainConfig{});
  std::string section, key;
  if (const auto dot = path.find('.'); dot != std::string::npos) {
    section = path.substr(0, dot);
    key = path.substr(dot + 1);
  } else {
    std::vector<std::string> hits;
    for (const auto& [name, body] : defaults.items())
      if (body.contains(path)) hits.push_back(name);
    if (hits.size() != 1) {
      throw ConfigError("override key '" + path + "' is " + (hits.empty() ? "unknown" : "ambiguous"));
    }
    section = hits[0];
    key = path;
  }
  if (!defaults.contains(section) || !defaults[section].contains(key)) {
    throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  config[section][key] = value;
}

json architecture_json(const ModelConfig& m) {
  TrainConfig c;
  c.model = m;
  json full = to_json(c);
  json arch;
  arch["model"] = full["model"];
  arch["connectivity"] = full["connectivity"];
  arch["data"] = {{"n_roi", m.n_roi}, {"t_len", m.t_len}, {"n_classes", m.n_classes}};
  return arch;
}

ModelConfig model_config_from_architecture(const json& arch) {
  json partial;
  partial["model"] = arch.at("model");
  partial["connectivity"] = arch.at("connectivity");
  ModelConfig m = train_config_from_json(partial).model;
  try {
    m.n_roi = arch.at("data").at("n_roi").get<std::size_t>();
    m.t_len = arch.at("data").at("t_len").get<std::size_t>();
    m.n_classes = arch.at("data").at("n_classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("architecture record: ") + e.what());
  }
  return m;
}

std::uint64_t config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace afcn
