#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "config.hpp"
#include "helpers.hpp"

using namespace gp;
using nlohmann::json;

TEST_CASE("config: defaults are valid and round-trip") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.data.window_len == 18);
  CHECK(c.data.stride == 2);
  CHECK(c.data.seq_len == 40);
  CHECK(c.model.encoder.layers == 4);
  CHECK(c.variants_for_crossval().size() == 8);
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
}

TEST_CASE("config: partial documents override only what they name") {
  const auto c = RunConfig::from_json(json::parse(R"({"seed": 9, "model": {"channels": [8, 16]},
      "variant": {"labeling": "binary", "prediction": "classification", "encoder": false},
      "crossval": {"folds": 2, "variants": ["multi-phase/crf/te"]}})"));
  CHECK(c.seed == 9);
  CHECK(c.model.stgcn.channels == std::vector<std::size_t>{8, 16});
  CHECK(c.model.variant == ModelVariant{Labeling::binary, Prediction::classification, false});
  CHECK(c.folds == 2);
  REQUIRE(c.variants_for_crossval().size() == 1);
  CHECK(c.variants_for_crossval()[0].name() == "multi-phase/crf/te");
  CHECK(c.train_config().seed == 9);
  CHECK(c.synth_config().seed == 9);
}

TEST_CASE("config: unknown keys, wrong types and invalid values are rejected") {
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"sede": 1})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"model": {"chanels": [4]}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"seed": "one"})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"train": {"epochs": -1}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"variant": {"labeling": "ternary"}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"data": {"scale_pair": [1]}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse("[]")), ConfigError);

  RunConfig c;
  c.model.stgcn.temporal_kernel = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.model.stgcn.channels.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config: hash ignores the job count and tracks everything else") {
  RunConfig a;
  RunConfig b = a;
  b.jobs = 4;
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("config: load from file") {
  testing::TempDir dir("config");
  {
    std::ofstream f(dir / "c.json");
    f << R"({"seed": 3, "jobs": 2})";
  }
  const auto c = RunConfig::load(dir / "c.json");
  CHECK(c.seed == 3);
  CHECK(c.jobs == 2);
  {
    std::ofstream f(dir / "bad.json");
    f << "{not json";
  }
  CHECK_THROWS_AS(RunConfig::load(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
}

TEST_CASE("config: shipped synthetic configuration parses") {
  const auto path = std::filesystem::path(GP_SOURCE_DIR) / "configs" / "synthetic.json";
  const auto c = RunConfig::load(path);
  CHECK_NOTHROW(c.validate());
  CHECK(c.folds == 2);
  CHECK(c.train.schedule.total_epochs <= 20);
}

TEST_CASE("config: shipped graph and joint selection files match the built-ins") {
  const auto data = std::filesystem::path(GP_SOURCE_DIR) / "data";
  RunConfig c;
  c.graph_file = (data / "graph_27.json").string();
  c.joint_selection_file = (data / "joint_selection_27.json").string();
  CHECK(c.graph().hash() == RunConfig{}.graph().hash());
  CHECK(c.joint_selection().indices == JointSelection::whole_body_default().indices);
}
