#include "gesturephase/gesturephase.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

#include "commands.hpp"
#include "crf.hpp"

struct gp_config {
  gp::RunConfig value;
};

struct gp_model {
  gp::cmd::LoadedModel value;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
gp_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void emit(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn) g_log_fn(msg.c_str(), g_log_user);
}

gp::cmd::Log logger() { return emit; }

gp_status fail(gp_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn>
gp_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const gp::Error& e) {
    switch (e.kind()) {
      case gp::ErrorKind::usage: return fail(GP_ERR_USAGE, e.what());
      case gp::ErrorKind::data: return fail(GP_ERR_DATA, e.what());
      case gp::ErrorKind::numeric: return fail(GP_ERR_NUMERIC, e.what());
    }
    return fail(GP_ERR_INTERNAL, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(GP_ERR_DATA, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(GP_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GP_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_json(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

std::string need_path(const char* p, const char* what) {
  if (!p || !*p) throw gp::ConfigError(std::string(what) + " path is required");
  return p;
}

std::string opt_path(const char* p) { return p ? p : ""; }

void need(const void* p, const char* what) {
  if (!p) throw gp::ContractError(std::string(what) + " must not be null");
}

gp::CrfParams<double> crf_params(std::size_t labels, const double* transitions, const double* start,
                                 const double* end) {
  need(transitions, "transitions");
  need(start, "start");
  need(end, "end");
  gp::nn::Tensor<double> tr({labels, labels}), st({labels}), en({labels});
  std::copy(transitions, transitions + labels * labels, tr.data());
  std::copy(start, start + labels, st.data());
  std::copy(end, end + labels, en.data());
  return gp::CrfParams<double>(std::move(tr), std::move(st), std::move(en));
}

gp::nn::Tensor<double> emission_tensor(const double* emissions, std::size_t t, std::size_t labels) {
  need(emissions, "emissions");
  if (t == 0 || labels == 0) throw gp::ShapeError("emissions must be non-empty");
  if (labels > 255) throw gp::RangeError("at most 255 labels are supported");
  gp::nn::Tensor<double> em({t, labels});
  std::copy(emissions, emissions + t * labels, em.data());
  return em;
}

}  // namespace

extern "C" {

const char* gp_version(void) { return "0.1.0"; }

const char* gp_last_error(void) { return g_last_error.c_str(); }

void gp_string_free(char* s) { std::free(s); }

void gp_set_log_callback(gp_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

gp_status gp_config_default(gp_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new gp_config{};
    return GP_OK;
  });
}

gp_status gp_config_load(const char* path, gp_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new gp_config{gp::RunConfig::load(need_path(path, "configuration"))};
    return GP_OK;
  });
}

gp_status gp_config_parse(const char* json, gp_config** out) {
  return guarded([&] {
    need(out, "out");
    need(json, "json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw gp::ConfigError(e.what());
    }
    *out = new gp_config{gp::RunConfig::from_json(j)};
    return GP_OK;
  });
}

gp_status gp_config_set_seed(gp_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->value.seed = seed;
    return GP_OK;
  });
}

gp_status gp_config_set_jobs(gp_config* cfg, unsigned jobs) {
  return guarded([&] {
    need(cfg, "config");
    if (jobs == 0) throw gp::ConfigError("jobs must be at least 1");
    cfg->value.jobs = jobs;
    return GP_OK;
  });
}

gp_status gp_config_to_json(const gp_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "out");
    put_json(out_json, cfg->value.to_json());
    return GP_OK;
  });
}

gp_status gp_config_hash(const gp_config* cfg, char** out_hash) {
  return guarded([&] {
    need(cfg, "config");
    need(out_hash, "out");
    *out_hash = dup_string(cfg->value.hash());
    return GP_OK;
  });
}

void gp_config_free(gp_config* cfg) { delete cfg; }

gp_status gp_synth(const gp_config* cfg, const char* out_dir, char** out_summary) {
  return guarded([&] {
    need(cfg, "config");
    put_json(out_summary, gp::cmd::synth(cfg->value, need_path(out_dir, "output"), logger()));
    return GP_OK;
  });
}

gp_status gp_prepare(const gp_config* cfg, const char* poses_dir, const char* annotations_csv, const char* out_dir,
                     char** out_summary) {
  return guarded([&] {
    need(cfg, "config");
    put_json(out_summary, gp::cmd::prepare(cfg->value, need_path(poses_dir, "poses"), opt_path(annotations_csv),
                                           need_path(out_dir, "output"), logger()));
    return GP_OK;
  });
}

gp_status gp_train(const gp_config* cfg, const char* data_dir, const char* out_dir, char** out_summary) {
  return guarded([&] {
    need(cfg, "config");
    put_json(out_summary, gp::cmd::train(cfg->value, need_path(data_dir, "data"), need_path(out_dir, "output"), {},
                                         logger()));
    return GP_OK;
  });
}

gp_status gp_crossval(const gp_config* cfg, const char* data_dir, const char* out_dir, char** out_summary) {
  return guarded([&] {
    need(cfg, "config");
    put_json(out_summary,
             gp::cmd::crossval(cfg->value, need_path(data_dir, "data"), need_path(out_dir, "output"), logger()));
    return GP_OK;
  });
}

gp_status gp_gradcheck(const gp_config* cfg, unsigned seeds, const char* out_file, char** out_report) {
  return guarded([&] {
    need(cfg, "config");
    const auto report = gp::cmd::gradcheck(cfg->value, seeds, opt_path(out_file), logger());
    put_json(out_report, report);
    if (!report.at("passed").get<bool>()) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "gradient check failed: max relative error %.3e exceeds %.0e",
                    report.at("max_rel_error").get<double>(), report.at("threshold").get<double>());
      return fail(GP_ERR_NUMERIC, buf);
    }
    return GP_OK;
  });
}

gp_status gp_model_load(const char* dir, gp_model** out) {
  return guarded([&] {
    need(out, "out");
    *out = new gp_model{gp::cmd::load_model(need_path(dir, "model"))};
    return GP_OK;
  });
}

gp_status gp_model_info(const gp_model* model, char** out_json) {
  return guarded([&] {
    need(model, "model");
    need(out_json, "out");
    const auto& m = model->value;
    put_json(out_json, {{"config_hash", m.config_hash},
                        {"seed", m.config.seed},
                        {"variant", m.model->variant().name()},
                        {"labels", m.model->variant().label_chars()},
                        {"parameters", m.model->params().scalar_count()},
                        {"config", m.config.to_json()}});
    return GP_OK;
  });
}

gp_status gp_model_evaluate(const gp_model* model, const char* data_dir, const char* out_file, unsigned jobs,
                            char** out_report) {
  return guarded([&] {
    need(model, "model");
    put_json(out_report,
             gp::cmd::evaluate(model->value, need_path(data_dir, "data"), opt_path(out_file), jobs, {}, logger()));
    return GP_OK;
  });
}

gp_status gp_model_predict(const gp_model* model, const char* poses_file, const char* out_file, char** out_result) {
  return guarded([&] {
    need(model, "model");
    put_json(out_result, gp::cmd::predict(model->value, need_path(poses_file, "poses"), opt_path(out_file), logger()));
    return GP_OK;
  });
}

void gp_model_free(gp_model* model) { delete model; }

gp_status gp_crf_log_partition(const double* emissions, size_t t, size_t labels, const double* transitions,
                               const double* start, const double* end, double* out_log_z) {
  return guarded([&] {
    need(out_log_z, "out");
    const auto em = emission_tensor(emissions, t, labels);
    *out_log_z = gp::log_partition(em, crf_params(labels, transitions, start, end));
    return GP_OK;
  });
}

gp_status gp_crf_viterbi(const double* emissions, size_t t, size_t labels, const double* transitions,
                         const double* start, const double* end, uint8_t* out_path, double* out_score) {
  return guarded([&] {
    need(out_path, "out path");
    const auto em = emission_tensor(emissions, t, labels);
    const auto path = gp::viterbi(em, crf_params(labels, transitions, start, end));
    std::copy(path.labels.begin(), path.labels.end(), out_path);
    if (out_score) *out_score = path.score;
    return GP_OK;
  });
}

}  // extern "C"
