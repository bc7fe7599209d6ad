#include "chartloc/chartloc.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "core/common.hpp"
#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/features.hpp"
#include "core/metrics.hpp"
#include "core/net.hpp"
#include "core/pso.hpp"
#include "core/rng.hpp"
#include "core/train.hpp"

using namespace chartloc;

struct chartloc_scene {
  Scene scene;
};
struct chartloc_dataset {
  Dataset dataset;
};
struct chartloc_model {
  ChartNetF net;
};

namespace {

thread_local std::string g_last_error;

chartloc_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return CHARTLOC_ERROR_INVALID_ARGUMENT;
    case ErrorCode::io: return CHARTLOC_ERROR_IO;
    case ErrorCode::bad_format: return CHARTLOC_ERROR_BAD_FORMAT;
    case ErrorCode::numeric: return CHARTLOC_ERROR_NUMERIC;
    case ErrorCode::unsupported: return CHARTLOC_ERROR_UNSUPPORTED;
  }
  return CHARTLOC_ERROR_INTERNAL;
}

template <class Fn>
chartloc_status guarded(Fn&& fn) {
  try {
    fn();
    return CHARTLOC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CHARTLOC_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CHARTLOC_ERROR_INTERNAL;
  }
}

chartloc_status need(bool ok, const char* msg) {
  if (ok) return CHARTLOC_OK;
  g_last_error = msg;
  return CHARTLOC_ERROR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

double* dup_positions(const std::vector<Vec3>& positions) {
  double* out = new double[positions.size() * 3];
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[3 * i] = positions[i].x();
    out[3 * i + 1] = positions[i].y();
    out[3 * i + 2] = positions[i].z();
  }
  return out;
}

std::string or_empty(const char* s) { return s ? std::string(s) : std::string(); }

}  // namespace

extern "C" {

const char* chartloc_version(void) { return "0.1.0"; }

const char* chartloc_status_name(chartloc_status status) {
  switch (status) {
    case CHARTLOC_OK: return "ok";
    case CHARTLOC_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case CHARTLOC_ERROR_IO: return "i/o error";
    case CHARTLOC_ERROR_BAD_FORMAT: return "bad format";
    case CHARTLOC_ERROR_NUMERIC: return "numeric failure";
    case CHARTLOC_ERROR_UNSUPPORTED: return "unsupported";
    case CHARTLOC_ERROR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* chartloc_last_error(void) { return g_last_error.c_str(); }

void chartloc_string_free(char* s) { delete[] s; }
void chartloc_buffer_free(double* p) { delete[] p; }

chartloc_status chartloc_scene_parse(const char* json_text, chartloc_scene** out) {
  if (auto st = need(json_text && out, "scene json and out required")) return st;
  return guarded([&]() {
    auto handle = std::make_unique<chartloc_scene>();
    handle->scene = build_scene(scene_config_from_json(json_text));
    *out = handle.release();
  });
}

chartloc_status chartloc_scene_dump(const chartloc_scene* scene, char** json_out) {
  if (auto st = need(scene && json_out, "scene and out required")) return st;
  return guarded([&]() { *json_out = dup_string(scene_config_to_json(scene->scene)); });
}

void chartloc_scene_free(chartloc_scene* scene) { delete scene; }

chartloc_status chartloc_sim_config_resolve(const char* sim_json, char** resolved_out) {
  if (auto st = need(resolved_out != nullptr, "out required")) return st;
  return guarded([&]() {
    *resolved_out = dup_string(sim_params_to_json(sim_params_from_json(or_empty(sim_json))));
  });
}

chartloc_status chartloc_simulate(const chartloc_scene* scene, const char* sim_json,
                                  uint64_t seed, int64_t n_steps,
                                  chartloc_dataset** out) {
  if (auto st = need(scene && out, "scene and out required")) return st;
  if (auto st = need(n_steps >= 2, "n_steps must be >= 2")) return st;
  return guarded([&]() {
    const SimParams p = sim_params_from_json(or_empty(sim_json));
    const Trajectory traj = generate_trajectory(
        scene->scene, static_cast<std::size_t>(n_steps), derive_seed(seed, 1),
        p.kinematics);
    auto handle = std::make_unique<chartloc_dataset>();
    handle->dataset = sample_dataset(scene->scene, traj, p.channel, p.c_bar,
                                     p.laser, derive_seed(seed, 2));
    *out = handle.release();
  });
}

chartloc_status chartloc_dataset_write(const chartloc_dataset* dataset,
                                       const char* dir) {
  if (auto st = need(dataset && dir, "dataset and dir required")) return st;
  return guarded([&]() { write_dataset(dataset->dataset, dir); });
}

chartloc_status chartloc_dataset_open(const char* dir, chartloc_dataset_mode mode,
                                      chartloc_dataset** out) {
  if (auto st = need(dir && out, "dir and out required")) return st;
  DatasetMode m;
  switch (mode) {
    case CHARTLOC_DATASET_TRAINING: m = DatasetMode::training; break;
    case CHARTLOC_DATASET_EVALUATION: m = DatasetMode::evaluation; break;
    case CHARTLOC_DATASET_FULL: m = DatasetMode::full; break;
    default: return need(false, "unknown dataset mode");
  }
  return guarded([&]() {
    auto handle = std::make_unique<chartloc_dataset>();
    handle->dataset = read_dataset(dir, m);
    *out = handle.release();
  });
}

chartloc_status chartloc_dataset_info_get(const chartloc_dataset* dataset,
                                          chartloc_dataset_info* out) {
  if (auto st = need(dataset && out, "dataset and out required")) return st;
  const Dataset& ds = dataset->dataset;
  out->n_steps = ds.n_steps;
  out->n_trps = ds.n_trps;
  out->c_bar = ds.c_bar;
  out->n_beams = ds.n_beams;
  out->sample_rate_hz = ds.sample_rate_hz;
  out->dt = ds.dt;
  out->ue_height = ds.ue_height;
  out->has_laser = ds.has_laser ? 1 : 0;
  out->has_ground_truth = ds.has_ground_truth ? 1 : 0;
  return CHARTLOC_OK;
}

chartloc_status chartloc_dataset_ground_truth(const chartloc_dataset* dataset,
                                              double** positions_out, size_t* n_out) {
  if (auto st = need(dataset && positions_out && n_out, "all arguments required"))
    return st;
  return guarded([&]() {
    const Dataset& ds = dataset->dataset;
    require(ds.has_ground_truth, "dataset has no ground truth");
    std::vector<Vec3> gt(ds.n_steps);
    for (std::int64_t i = 0; i < ds.n_steps; ++i) gt[i] = ds.true_position(i);
    *positions_out = dup_positions(gt);
    *n_out = gt.size();
  });
}

void chartloc_dataset_free(chartloc_dataset* dataset) { delete dataset; }

chartloc_status chartloc_power_distance_check(const chartloc_dataset* dataset,
                                              double margin_db, uint64_t n_triples,
                                              uint64_t seed, double* rate_out) {
  if (auto st = need(dataset && rate_out, "dataset and out required")) return st;
  return guarded([&]() {
    *rate_out = check_power_distance(dataset->dataset, margin_db, n_triples, seed);
  });
}

chartloc_status chartloc_train_config_resolve(const char* train_json,
                                              char** resolved_out) {
  if (auto st = need(resolved_out != nullptr, "out required")) return st;
  return guarded([&]() {
    *resolved_out =
        dup_string(train_config_to_json(train_config_from_json(or_empty(train_json))));
  });
}

chartloc_status chartloc_train(const chartloc_dataset* dataset, const char* train_json,
                               chartloc_model** model_out, double** batch_loss_out,
                               size_t* n_batches_out) {
  if (auto st = need(dataset && model_out, "dataset and model out required")) return st;
  return guarded([&]() {
    const TrainConfig cfg = train_config_from_json(or_empty(train_json));
    TrainResult result = train(dataset->dataset, cfg);
    auto handle = std::make_unique<chartloc_model>();
    handle->net = std::move(result.model);
    if (batch_loss_out && n_batches_out) {
      double* losses = new double[result.batch_loss.size()];
      std::memcpy(losses, result.batch_loss.data(),
                  result.batch_loss.size() * sizeof(double));
      *batch_loss_out = losses;
      *n_batches_out = result.batch_loss.size();
    }
    *model_out = handle.release();
  });
}

chartloc_status chartloc_model_save(const chartloc_model* model, const char* path) {
  if (auto st = need(model && path, "model and path required")) return st;
  return guarded([&]() { model->net.save(path); });
}

chartloc_status chartloc_model_load(const char* path, chartloc_model** out) {
  if (auto st = need(path && out, "path and out required")) return st;
  return guarded([&]() {
    auto handle = std::make_unique<chartloc_model>();
    handle->net = ChartNetF::load(path);
    *out = handle.release();
  });
}

chartloc_status chartloc_model_forward(const chartloc_model* model,
                                       const float* feature, size_t len,
                                       double out_xy[2]) {
  if (auto st = need(model && feature && out_xy, "all arguments required")) return st;
  return guarded([&]() {
    const int rows = model->net.input_rows();
    const int cols = model->net.input_cols();
    require(len == static_cast<size_t>(rows) * cols, "feature length mismatch");
    Eigen::MatrixXd y(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) y(r, c) = feature[r * cols + c];
    const Eigen::Vector2d p = model->net.forward(y);
    out_xy[0] = p.x();
    out_xy[1] = p.y();
  });
}

void chartloc_model_free(chartloc_model* model) { delete model; }

chartloc_status chartloc_pso_config_resolve(const char* pso_json, char** resolved_out) {
  if (auto st = need(resolved_out != nullptr, "out required")) return st;
  return guarded([&]() {
    *resolved_out =
        dup_string(pso_config_to_json(pso_config_from_json(or_empty(pso_json))));
  });
}

chartloc_status chartloc_estimate_bias(const chartloc_model* model,
                                       const chartloc_dataset* dataset,
                                       const char* pso_json, double bias_out[3]) {
  if (auto st = need(model && dataset && bias_out, "all arguments required")) return st;
  return guarded([&]() {
    const PsoConfig cfg = pso_config_from_json(or_empty(pso_json));
    const Vec3 bias = estimate_bias(model->net, dataset->dataset, cfg);
    bias_out[0] = bias.x();
    bias_out[1] = bias.y();
    bias_out[2] = bias.z();
  });
}

chartloc_status chartloc_localize(const chartloc_model* model,
                                  const chartloc_dataset* dataset,
                                  const double bias[3], double** positions_out,
                                  size_t* n_out) {
  if (auto st = need(model && dataset && bias && positions_out && n_out,
                     "all arguments required"))
    return st;
  return guarded([&]() {
    const Vec3 b(bias[0], bias[1], bias[2]);
    const std::vector<Vec3> positions = localize_all(model->net, dataset->dataset, b);
    *positions_out = dup_positions(positions);
    *n_out = positions.size();
  });
}

chartloc_status chartloc_tdoa_baseline(const chartloc_dataset* dataset,
                                       const char* pso_json, double** positions_out,
                                       size_t* n_out) {
  if (auto st = need(dataset && positions_out && n_out, "all arguments required"))
    return st;
  return guarded([&]() {
    const PsoConfig cfg = pso_config_from_json(or_empty(pso_json));
    const std::vector<Vec3> positions = tdoa_pso_baseline(dataset->dataset, cfg);
    *positions_out = dup_positions(positions);
    *n_out = positions.size();
  });
}

chartloc_status chartloc_evaluate(const chartloc_dataset* dataset,
                                  const double* positions, size_t n, int32_t k,
                                  chartloc_report* report_out, double** errors_out) {
  if (auto st = need(dataset && positions && report_out, "dataset, positions, report required"))
    return st;
  return guarded([&]() {
    std::vector<Vec3> est(n);
    for (size_t i = 0; i < n; ++i)
      est[i] = Vec3(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]);
    const EvalReport report = evaluate_positions(est, dataset->dataset, k);
    report_out->ct = report.ct;
    report_out->tw = report.tw;
    report_out->ce90 = report.ce90;
    report_out->mean_err = report.mean_err;
    report_out->k_neighbors = report.k_neighbors;
    if (errors_out) {
      double* errs = new double[report.per_step_errors.size()];
      std::memcpy(errs, report.per_step_errors.data(),
                  report.per_step_errors.size() * sizeof(double));
      *errors_out = errs;
    }
  });
}

}  // extern "C"
