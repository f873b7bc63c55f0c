// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>

#include "afcn/checkpoint.hpp"
#include "afcn/config.hpp"
#include "afcn/errors.hpp"
#include "scratch.hpp"

using namespace afcn;
using nlohmann::json;

TEST_CASE("config: defaults round-trip through JSON") {
  const TrainConfig d;
  const TrainConfig back = train_config_from_json(to_json(d));
  CHECK(to_json(back) == to_json(d));
  const json j = to_json(d);
  CHECK(j["train"]["lr"] == 1e-3);
  CHECK(j["train"]["weight_decay"] == 1e-4);
  CHECK(j["train"]["batch_size"] == 32);
  CHECK(j["train"]["patience"] == 15);
  CHECK(j["model"]["K"] == 2);
  CHECK(j["connectivity"]["dt_mode"] == "dynamic");
}

TEST_CASE("config: partial files and unknown keys") {
  const auto c = train_config_from_json(json::parse(R"({"losses": {"lambda1": 0}, "model": {"K": 3}})"));
  CHECK(c.losses.weights.lambda1 == 0.0);
  CHECK(c.model.levels == 3);
  CHECK(c.lr == 1e-3);
  CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"losses": {"lambda3": 1}})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"optim": {}})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"train": {"lr": "fast"}})")), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(json::parse(R"({"connectivity": {"dt_mode": "otsu"}})")), ConfigError);
}

TEST_CASE("config: dotted and bare overrides") {
  json j = to_json(TrainConfig{});
  apply_override(j, "losses.lambda1=0");
  apply_override(j, "dt_mode=fixed25");
  apply_override(j, "gcn_dims=[16,16]");
  const auto c = train_config_from_json(j);
  CHECK(c.losses.weights.lambda1 == 0.0);
  CHECK(c.model.threshold.mode == ThresholdMode::FixedTopQ);
  CHECK(c.model.gcn_dims == std::vector<std::size_t>{16, 16});
  CHECK_THROWS_AS(apply_override(j, "nonsense=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "train.K=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "lambda1"), ConfigError);
}

TEST_CASE("config: validation") {
  TrainConfig c;
  c.model.n_roi = 8;
  c.model.t_len = 64;
  c.model.n_classes = 2;
  CHECK_NOTHROW(c.validate());
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.patience = 1;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.batch_size = 1;
  c.model.w_low = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("architecture hash tracks shape-relevant settings") {
  ModelConfig m;
  m.n_roi = 8;
  m.t_len = 64;
  m.n_classes = 2;
  const auto h = config_hash(architecture_json(m));
  CHECK(h == config_hash(architecture_json(m)));
  ModelConfig other = m;
  other.cross_dim = 16;
  CHECK(h != config_hash(architecture_json(other)));
  const ModelConfig back = model_config_from_architecture(architecture_json(m));
  CHECK(architecture_json(back) == architecture_json(m));
}

TEST_CASE("checkpoint: save, load and restore") {
  const ScratchDir dir("ckpt");
  ModelConfig m;
  m.n_roi = 6;
  m.t_len = 64;
  m.n_classes = 2;
  m.gcn_dims = {8, 4};
  m.cross_dim = 3;
  m.mlp_hidden = 5;
  const auto params = init_model(m, 9);
  save_checkpoint(dir / "a.bin", params, m);
  const auto ck = load_checkpoint(dir / "a.bin");
  CHECK(ck.config_hash == config_hash(architecture_json(m)));
  const auto [m2, p2] = restore_model(ck);
  CHECK(architecture_json(m2) == architecture_json(m));
  const auto r1 = params.refs();
  const auto r2 = p2.refs();
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    CHECK(r1[i]->name == r2[i]->name);
    CHECK(r1[i]->value == r2[i]->value);
  }

  std::ifstream in(dir / "a.bin", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "AFCN");
}

TEST_CASE("checkpoint: corrupt files and mismatched hashes") {
  const ScratchDir dir("ckpt_bad");
  std::ofstream(dir / "junk.bin") << "NOPE";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), LoadError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.bin"), LoadError);

  ModelConfig m;
  m.n_roi = 6;
  m.t_len = 64;
  m.n_classes = 2;
  m.gcn_dims = {4, 4};
  m.cross_dim = 2;
  m.mlp_hidden = 4;
  save_checkpoint(dir / "a.bin", init_model(m, 1), m);
  auto ck = load_checkpoint(dir / "a.bin");
  ck.config_hash ^= 1;
  CHECK_THROWS_AS(restore_model(ck), ConfigError);
  ck = load_checkpoint(dir / "a.bin");
  ck.arrays.pop_back();
  CHECK_THROWS_AS(restore_model(ck), ConfigError);
}
