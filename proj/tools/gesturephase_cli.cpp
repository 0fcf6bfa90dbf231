// Command-line front end. Talks to the library only through its C API.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gesturephase/gesturephase.h"

namespace {

struct ConfigDeleter {
  void operator()(gp_config* c) const { gp_config_free(c); }
};
struct ModelDeleter {
  void operator()(gp_model* m) const { gp_model_free(m); }
};
using ConfigPtr = std::unique_ptr<gp_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<gp_model, ModelDeleter>;

struct Failure {
  gp_status status;
};

void check(gp_status s) {
  if (s != GP_OK) {
    std::fprintf(stderr, "error: %s\n", gp_last_error());
    throw Failure{s};
  }
}

// Takes ownership of a library string and prints it.
void print_owned(char* s) {
  if (!s) return;
  std::printf("%s\n", s);
  gp_string_free(s);
}

void log_to_stderr(const char* msg, void*) { std::fprintf(stderr, "%s\n", msg); }

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

ConfigPtr make_config(const Globals& g) {
  gp_config* raw = nullptr;
  check(g.config_path.empty() ? gp_config_default(&raw) : gp_config_load(g.config_path.c_str(), &raw));
  ConfigPtr cfg(raw);
  if (g.seed) check(gp_config_set_seed(cfg.get(), *g.seed));
  if (g.jobs) check(gp_config_set_jobs(cfg.get(), *g.jobs));
  return cfg;
}

ModelPtr load_model(const std::string& dir) {
  gp_model* raw = nullptr;
  check(gp_model_load(dir.c_str(), &raw));
  return ModelPtr(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-phase gesture detection from skeleton keypoint streams."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(gp_version()));

  Globals g;
  bool quiet = false;
  app.add_option("-c,--config", g.config_path, "JSON run configuration (defaults apply to missing keys)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every random draw; overrides the configuration");
  app.add_option("-j,--jobs", g.jobs, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", quiet, "Suppress progress output on stderr");

  std::function<void()> action;

  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic pose corpus with ground-truth phases");
  synth->add_option("-o,--out", out_dir, "Output directory")->required();
  synth->callback([&] {
    action = [&] {
      auto cfg = make_config(g);
      char* summary = nullptr;
      check(gp_synth(cfg.get(), out_dir.c_str(), &summary));
      print_owned(summary);
    };
  });

  std::string poses, annotations;
  auto* prepare = app.add_subcommand("prepare", "Window, label and store pose files for training");
  prepare->add_option("--poses", poses, "Directory of .jsonl pose files")->required()->check(CLI::ExistingDirectory);
  prepare->add_option("--annotations", annotations, "Stroke annotation CSV")->check(CLI::ExistingFile);
  prepare->add_option("-o,--out", out_dir, "Output directory")->required();
  prepare->callback([&] {
    action = [&] {
      auto cfg = make_config(g);
      char* summary = nullptr;
      check(gp_prepare(cfg.get(), poses.c_str(), annotations.c_str(), out_dir.c_str(), &summary));
      print_owned(summary);
    };
  });

  std::string data_dir;
  auto* train = app.add_subcommand("train", "Train one model variant on a prepared dataset");
  train->add_option("--data", data_dir, "Prepared dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("-o,--out", out_dir, "Checkpoint directory")->required();
  train->callback([&] {
    action = [&] {
      auto cfg = make_config(g);
      char* summary = nullptr;
      check(gp_train(cfg.get(), data_dir.c_str(), out_dir.c_str(), &summary));
      print_owned(summary);
    };
  });

  std::string model_dir, out_file;
  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on a prepared dataset");
  evaluate->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--data", data_dir, "Prepared dataset directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("-o,--out", out_file, "Report file (JSON)");
  evaluate->callback([&] {
    action = [&] {
      auto model = load_model(model_dir);
      char* report = nullptr;
      check(gp_model_evaluate(model.get(), data_dir.c_str(), out_file.c_str(), g.jobs.value_or(1), &report));
      print_owned(report);
    };
  });

  auto* crossval = app.add_subcommand("crossval", "Subject-disjoint k-fold cross-validation over model variants");
  crossval->add_option("--data", data_dir, "Prepared dataset directory")->required()->check(CLI::ExistingDirectory);
  crossval->add_option("-o,--out", out_dir, "Output directory for report.json, log.jsonl, summary.txt")->required();
  crossval->callback([&] {
    action = [&] {
      auto cfg = make_config(g);
      char* summary = nullptr;
      check(gp_crossval(cfg.get(), data_dir.c_str(), out_dir.c_str(), &summary));
      print_owned(summary);
    };
  });

  std::string poses_file;
  auto* predict = app.add_subcommand("predict", "Label the windows of one pose file and extract gesture units");
  predict->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--poses", poses_file, "Pose file (.jsonl)")->required()->check(CLI::ExistingFile);
  predict->add_option("-o,--out", out_file, "Prediction file (JSON); printed when omitted");
  predict->callback([&] {
    action = [&] {
      auto model = load_model(model_dir);
      char* result = nullptr;
      check(gp_model_predict(model.get(), poses_file.c_str(), out_file.c_str(), &result));
      if (out_file.empty()) {
        print_owned(result);
      } else {
        gp_string_free(result);
      }
    };
  });

  unsigned seeds = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer's gradients");
  gradcheck->add_option("--seeds", seeds, "Random draws per layer type")->check(CLI::PositiveNumber);
  gradcheck->add_option("-o,--out", out_file, "Report file (JSON)");
  gradcheck->callback([&] {
    action = [&] {
      auto cfg = make_config(g);
      char* report = nullptr;
      const gp_status s = gp_gradcheck(cfg.get(), seeds, out_file.c_str(), &report);
      if (s == GP_ERR_NUMERIC && report) print_owned(report);
      check(s);
      if (out_file.empty()) {
        print_owned(report);
      } else {
        gp_string_free(report);
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (!quiet) gp_set_log_callback(log_to_stderr, nullptr);
  try {
    if (action) action();
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
