/* C interface to the gesture phase detection library.
 *
 * Every call returns a gp_status. On failure the message is available from
 * gp_last_error() on the same thread until the next call. Strings returned
 * through char** out-parameters are owned by the caller and released with
 * gp_string_free().
 */
#ifndef GESTUREPHASE_H
#define GESTUREPHASE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GP_API __declspec(dllexport)
#else
#define GP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gp_status {
  GP_OK = 0,
  GP_ERR_USAGE = 1,   /* bad arguments or configuration */
  GP_ERR_DATA = 2,    /* unreadable, malformed or incompatible inputs */
  GP_ERR_NUMERIC = 3, /* divergence, non-finite values, gradient check breach */
  GP_ERR_INTERNAL = 4
} gp_status;

typedef struct gp_config gp_config;
typedef struct gp_model gp_model;

/* Receives progress lines. `user` is passed through unchanged. */
typedef void (*gp_log_fn)(const char* message, void* user);

GP_API const char* gp_version(void);
GP_API const char* gp_last_error(void);
GP_API void gp_string_free(char* s);

/* Process-wide; pass NULL to silence. */
GP_API void gp_set_log_callback(gp_log_fn fn, void* user);

/* Configuration. */
GP_API gp_status gp_config_default(gp_config** out);
GP_API gp_status gp_config_load(const char* path, gp_config** out);
GP_API gp_status gp_config_parse(const char* json, gp_config** out);
GP_API gp_status gp_config_set_seed(gp_config* cfg, uint64_t seed);
GP_API gp_status gp_config_set_jobs(gp_config* cfg, unsigned jobs);
GP_API gp_status gp_config_to_json(const gp_config* cfg, char** out_json);
GP_API gp_status gp_config_hash(const gp_config* cfg, char** out_hash);
GP_API void gp_config_free(gp_config* cfg);

/* Commands. `out_summary` may be NULL; otherwise it receives a JSON summary
 * stamped with the configuration hash and seed. */
GP_API gp_status gp_synth(const gp_config* cfg, const char* out_dir, char** out_summary);
GP_API gp_status gp_prepare(const gp_config* cfg, const char* poses_dir, const char* annotations_csv,
                            const char* out_dir, char** out_summary);
GP_API gp_status gp_train(const gp_config* cfg, const char* data_dir, const char* out_dir, char** out_summary);
GP_API gp_status gp_crossval(const gp_config* cfg, const char* data_dir, const char* out_dir, char** out_summary);
/* Returns GP_ERR_NUMERIC when any gating layer exceeds the threshold; the
 * report is still written and returned. */
GP_API gp_status gp_gradcheck(const gp_config* cfg, unsigned seeds, const char* out_file, char** out_report);

/* Trained models. */
GP_API gp_status gp_model_load(const char* dir, gp_model** out);
GP_API gp_status gp_model_info(const gp_model* model, char** out_json);
/* `out_file` may be NULL or empty to skip writing. */
GP_API gp_status gp_model_evaluate(const gp_model* model, const char* data_dir, const char* out_file, unsigned jobs,
                                   char** out_report);
GP_API gp_status gp_model_predict(const gp_model* model, const char* poses_file, const char* out_file,
                                  char** out_result);
GP_API void gp_model_free(gp_model* model);

/* Linear-chain CRF utilities on row-major buffers: emissions (t x labels),
 * transitions (labels x labels), start and end (labels). */
GP_API gp_status gp_crf_log_partition(const double* emissions, size_t t, size_t labels, const double* transitions,
                                      const double* start, const double* end, double* out_log_z);
/* Writes t label codes; ties resolve to the lowest code. */
GP_API gp_status gp_crf_viterbi(const double* emissions, size_t t, size_t labels, const double* transitions,
                                const double* start, const double* end, uint8_t* out_path, double* out_score);

#ifdef __cplusplus
}
#endif

#endif /* GESTUREPHASE_H */
