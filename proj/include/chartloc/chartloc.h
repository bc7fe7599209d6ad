/* chartloc: self-supervised channel-charting localization toolkit.
 *
 * C API over the C++ core. All objects are opaque handles created and
 * destroyed through these functions; every fallible call returns a
 * chartloc_status and leaves a human-readable message in
 * chartloc_last_error() (thread-local) on failure.
 *
 * Configuration strings are JSON; pass NULL or "" for defaults. The
 * *_config_resolve functions echo the fully-resolved configuration so
 * callers can log or snapshot it.
 */
#ifndef CHARTLOC_H
#define CHARTLOC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CHARTLOC_API __declspec(dllexport)
#else
#define CHARTLOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum chartloc_status {
  CHARTLOC_OK = 0,
  CHARTLOC_ERROR_INVALID_ARGUMENT = 1,
  CHARTLOC_ERROR_IO = 2,
  CHARTLOC_ERROR_BAD_FORMAT = 3,
  CHARTLOC_ERROR_NUMERIC = 4,
  CHARTLOC_ERROR_UNSUPPORTED = 5,
  CHARTLOC_ERROR_INTERNAL = 6
} chartloc_status;

typedef struct chartloc_scene chartloc_scene;
typedef struct chartloc_dataset chartloc_dataset;
typedef struct chartloc_model chartloc_model;

typedef enum chartloc_dataset_mode {
  /* never reads the ground-truth array */
  CHARTLOC_DATASET_TRAINING = 0,
  /* requires ground truth */
  CHARTLOC_DATASET_EVALUATION = 1,
  /* reads whatever is present */
  CHARTLOC_DATASET_FULL = 2
} chartloc_dataset_mode;

typedef struct chartloc_dataset_info {
  int64_t n_steps;
  int64_t n_trps;
  int64_t c_bar;
  int64_t n_beams;
  double sample_rate_hz;
  double dt;
  double ue_height;
  int has_laser;
  int has_ground_truth;
} chartloc_dataset_info;

typedef struct chartloc_report {
  double ct;
  double tw;
  double ce90;
  double mean_err;
  int32_t k_neighbors;
} chartloc_report;

CHARTLOC_API const char* chartloc_version(void);
CHARTLOC_API const char* chartloc_status_name(chartloc_status status);
/* Message from the most recent failing call on this thread. */
CHARTLOC_API const char* chartloc_last_error(void);

/* Release strings / double buffers returned through out-parameters. */
CHARTLOC_API void chartloc_string_free(char* s);
CHARTLOC_API void chartloc_buffer_free(double* p);

/* --- scene ------------------------------------------------------------ */

/* JSON: {"room": [[x,y],...], "obstacles": [[[x,y],...],...],
 *        "trps": [[x,y,z?],...], "ue_height": 1.5, "trp_height": 8.0} */
CHARTLOC_API chartloc_status chartloc_scene_parse(const char* json_text,
                                                  chartloc_scene** out);
CHARTLOC_API chartloc_status chartloc_scene_dump(const chartloc_scene* scene,
                                                 char** json_out);
CHARTLOC_API void chartloc_scene_free(chartloc_scene* scene);

/* --- simulation ------------------------------------------------------- */

CHARTLOC_API chartloc_status chartloc_sim_config_resolve(const char* sim_json,
                                                         char** resolved_out);

/* Random trajectory of n_steps plus per-step CIR features, ToA vectors,
 * laser scans and the ground-truth track (stored for evaluation only). */
CHARTLOC_API chartloc_status chartloc_simulate(const chartloc_scene* scene,
                                               const char* sim_json,
                                               uint64_t seed, int64_t n_steps,
                                               chartloc_dataset** out);

/* --- datasets ----------------------------------------------------------*/

CHARTLOC_API chartloc_status chartloc_dataset_write(const chartloc_dataset* dataset,
                                                    const char* dir);
CHARTLOC_API chartloc_status chartloc_dataset_open(const char* dir,
                                                   chartloc_dataset_mode mode,
                                                   chartloc_dataset** out);
CHARTLOC_API chartloc_status chartloc_dataset_info_get(const chartloc_dataset* dataset,
                                                       chartloc_dataset_info* out);
/* Ground-truth positions (n*3 doubles) for plotting/evaluation. */
CHARTLOC_API chartloc_status chartloc_dataset_ground_truth(
    const chartloc_dataset* dataset, double** positions_out, size_t* n_out);
CHARTLOC_API void chartloc_dataset_free(chartloc_dataset* dataset);

/* Fraction of sampled (closer, farther, TRP) triples whose received powers
 * satisfy the margin; diagnostic, needs ground truth. */
CHARTLOC_API chartloc_status chartloc_power_distance_check(
    const chartloc_dataset* dataset, double margin_db, uint64_t n_triples,
    uint64_t seed, double* rate_out);

/* --- training ----------------------------------------------------------*/

CHARTLOC_API chartloc_status chartloc_train_config_resolve(const char* train_json,
                                                           char** resolved_out);

/* Trains the chart model. batch_loss_out/n_batches_out (optional) receive
 * the per-step mean loss curve. */
CHARTLOC_API chartloc_status chartloc_train(const chartloc_dataset* dataset,
                                            const char* train_json,
                                            chartloc_model** model_out,
                                            double** batch_loss_out,
                                            size_t* n_batches_out);

/* --- models ------------------------------------------------------------*/

CHARTLOC_API chartloc_status chartloc_model_save(const chartloc_model* model,
                                                 const char* path);
CHARTLOC_API chartloc_status chartloc_model_load(const char* path,
                                                 chartloc_model** out);
/* feature: row-major n_trps x c_bar magnitudes. */
CHARTLOC_API chartloc_status chartloc_model_forward(const chartloc_model* model,
                                                    const float* feature,
                                                    size_t len, double out_xy[2]);
CHARTLOC_API void chartloc_model_free(chartloc_model* model);

/* --- offset, localization, evaluation -----------------------------------*/

CHARTLOC_API chartloc_status chartloc_pso_config_resolve(const char* pso_json,
                                                         char** resolved_out);

/* Constant chart offset (b_x, b_y, 0) minimizing the L1 ToA residual. */
CHARTLOC_API chartloc_status chartloc_estimate_bias(const chartloc_model* model,
                                                    const chartloc_dataset* dataset,
                                                    const char* pso_json,
                                                    double bias_out[3]);

/* Per-step positions (n*3 doubles: x, y, z). */
CHARTLOC_API chartloc_status chartloc_localize(const chartloc_model* model,
                                               const chartloc_dataset* dataset,
                                               const double bias[3],
                                               double** positions_out,
                                               size_t* n_out);

/* Classical TDoA baseline; needs >= 3 TRPs. */
CHARTLOC_API chartloc_status chartloc_tdoa_baseline(const chartloc_dataset* dataset,
                                                    const char* pso_json,
                                                    double** positions_out,
                                                    size_t* n_out);

/* Scores positions (n*3 doubles) against the dataset ground truth. k <= 0
 * picks max(1, floor(0.05 n)). errors_out (optional): per-step planar
 * errors, n doubles. */
CHARTLOC_API chartloc_status chartloc_evaluate(const chartloc_dataset* dataset,
                                               const double* positions, size_t n,
                                               int32_t k,
                                               chartloc_report* report_out,
                                               double** errors_out);

#ifdef __cplusplus
}
#endif

#endif /* CHARTLOC_H */
