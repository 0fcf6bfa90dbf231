#include <doctest.h>

#include <gesturephase/gesturephase.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  gp_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("capi: version and configuration handles") {
  CHECK(std::string(gp_version()).size() > 0);

  gp_config* cfg = nullptr;
  REQUIRE(gp_config_default(&cfg) == GP_OK);
  char* hash = nullptr;
  REQUIRE(gp_config_hash(cfg, &hash) == GP_OK);
  const std::string h0 = take(hash);
  CHECK(h0.size() == 16);

  CHECK(gp_config_set_jobs(cfg, 4) == GP_OK);
  REQUIRE(gp_config_hash(cfg, &hash) == GP_OK);
  CHECK(take(hash) == h0);
  CHECK(gp_config_set_seed(cfg, 7) == GP_OK);
  REQUIRE(gp_config_hash(cfg, &hash) == GP_OK);
  CHECK(take(hash) != h0);

  char* js = nullptr;
  REQUIRE(gp_config_to_json(cfg, &js) == GP_OK);
  const std::string text = take(js);
  CHECK(text.find("\"seed\": 7") != std::string::npos);

  gp_config* again = nullptr;
  REQUIRE(gp_config_parse(text.c_str(), &again) == GP_OK);
  REQUIRE(gp_config_hash(again, &hash) == GP_OK);
  char* h2 = nullptr;
  REQUIRE(gp_config_hash(cfg, &h2) == GP_OK);
  CHECK(take(hash) == take(h2));
  gp_config_free(again);
  gp_config_free(cfg);
  gp_config_free(nullptr);
}

TEST_CASE("capi: configuration errors map to usage") {
  gp_config* cfg = nullptr;
  CHECK(gp_config_parse("{not json", &cfg) == GP_ERR_USAGE);
  CHECK(cfg == nullptr);
  CHECK(std::string(gp_last_error()).size() > 0);
  CHECK(gp_config_parse(R"({"bogus": 1})", &cfg) == GP_ERR_USAGE);
  CHECK(std::string(gp_last_error()).find("bogus") != std::string::npos);
  CHECK(gp_config_parse(nullptr, &cfg) == GP_ERR_USAGE);
  CHECK(gp_config_parse("{}", nullptr) == GP_ERR_USAGE);
  CHECK(gp_config_load("/nonexistent/config.json", &cfg) == GP_ERR_USAGE);
}

TEST_CASE("capi: CRF utilities") {
  const std::vector<double> em{0, 1, 1, 0};
  const std::vector<double> zeros4(4, 0.0), zeros2(2, 0.0);
  double log_z = 0;
  REQUIRE(gp_crf_log_partition(em.data(), 2, 2, zeros4.data(), zeros2.data(), zeros2.data(), &log_z) == GP_OK);
  CHECK(log_z == doctest::Approx(2 * std::log(1 + std::exp(1.0))).epsilon(1e-14));

  std::uint8_t path[2] = {9, 9};
  double score = 0;
  REQUIRE(gp_crf_viterbi(em.data(), 2, 2, zeros4.data(), zeros2.data(), zeros2.data(), path, &score) == GP_OK);
  CHECK(path[0] == 1);
  CHECK(path[1] == 0);
  CHECK(score == doctest::Approx(2.0));

  CHECK(gp_crf_viterbi(em.data(), 2, 2, nullptr, zeros2.data(), zeros2.data(), path, nullptr) == GP_ERR_USAGE);
  CHECK(gp_crf_log_partition(em.data(), 2, 2, zeros4.data(), zeros2.data(), zeros2.data(), nullptr) == GP_ERR_USAGE);
  CHECK(gp_crf_log_partition(em.data(), 0, 2, zeros4.data(), zeros2.data(), zeros2.data(), &log_z) == GP_ERR_DATA);
  const std::vector<double> bad{0, NAN, 1, 0};
  CHECK(gp_crf_log_partition(bad.data(), 2, 2, zeros4.data(), zeros2.data(), zeros2.data(), &log_z) ==
        GP_ERR_NUMERIC);
}

TEST_CASE("capi: models") {
  gp_model* m = nullptr;
  CHECK(gp_model_load("/nonexistent/model", &m) == GP_ERR_DATA);
  CHECK(m == nullptr);
  CHECK(gp_model_load(nullptr, &m) == GP_ERR_USAGE);
  gp_model_free(nullptr);
}

TEST_CASE("capi: end-to-end on a tiny corpus") {
  const auto root = std::filesystem::temp_directory_path() / ("gp_capi_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  gp_config* cfg = nullptr;
  REQUIRE(gp_config_parse(R"({"seed": 2,
      "model": {"channels": [4], "temporal_kernel": 3, "heads": 2, "ffn_dim": 8, "layers": 1, "head_hidden": 6},
      "train": {"epochs": 1, "warmup_epochs": 1, "decay_epoch": 1, "batch_size": 2},
      "synth": {"n_subjects": 2, "frames_per_subject": 200}})",
                          &cfg) == GP_OK);
  const std::string raw = (root / "raw").string(), data = (root / "data").string(), model = (root / "model").string();
  char* summary = nullptr;
  REQUIRE(gp_synth(cfg, raw.c_str(), &summary) == GP_OK);
  CHECK(take(summary).find("\"subjects\": 2") != std::string::npos);
  REQUIRE(gp_prepare(cfg, (raw + "/poses").c_str(), (raw + "/annotations.csv").c_str(), data.c_str(), nullptr) ==
          GP_OK);
  REQUIRE(gp_train(cfg, data.c_str(), model.c_str(), nullptr) == GP_OK);

  gp_model* m = nullptr;
  REQUIRE(gp_model_load(model.c_str(), &m) == GP_OK);
  char* info = nullptr;
  REQUIRE(gp_model_info(m, &info) == GP_OK);
  CHECK(take(info).find("multi-phase/crf/te") != std::string::npos);
  char* report = nullptr;
  REQUIRE(gp_model_evaluate(m, data.c_str(), nullptr, 1, &report) == GP_OK);
  CHECK(take(report).find("stroke") != std::string::npos);
  char* pred = nullptr;
  REQUIRE(gp_model_predict(m, (raw + "/poses/synth_01.jsonl").c_str(), nullptr, &pred) == GP_OK);
  CHECK(take(pred).find("\"units\"") != std::string::npos);
  CHECK(gp_model_predict(m, (raw + "/poses/missing.jsonl").c_str(), nullptr, &pred) == GP_ERR_DATA);
  gp_model_free(m);
  gp_config_free(cfg);
  std::filesystem::remove_all(root);
}
