#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "core/scene.hpp"

namespace chartloc {

// Training/test bundle. Arrays are flat row-major float32, one file per
// tensor on disk; see docs/FORMATS.md for the byte-level layout.
struct Dataset {
  std::int64_t n_steps = 0;
  std::int64_t n_trps = 0;
  std::int64_t c_bar = 0;
  std::int64_t n_beams = 0;
  double sample_rate_hz = 0.0;
  double dt = 0.0;
  double ue_height = 0.0;
  std::vector<Vec3> trps;
  bool has_laser = false;
  bool has_ground_truth = false;

  std::vector<float> features;      // n_steps * n_trps * c_bar
  std::vector<float> toa;           // n_steps * n_trps, seconds
  std::vector<float> laser;         // n_steps * n_beams * 2, (r, phi)
  std::vector<float> ground_truth;  // n_steps * 3, evaluation only

  Eigen::MatrixXd feature_matrix(std::int64_t n) const;  // n_trps x c_bar
  Eigen::VectorXd toa_vector(std::int64_t n) const;      // n_trps
  LaserScan laser_scan(std::int64_t n) const;
  Vec3 true_position(std::int64_t n) const;

  void validate() const;  // array sizes vs header fields
};

// Loader contract: `training` never reads the ground-truth array (the file
// is not even opened); `evaluation` requires it.
enum class DatasetMode { training, evaluation, full };

void write_dataset(const Dataset& dataset, const std::string& dir);
Dataset read_dataset(const std::string& dir, DatasetMode mode);

}  // namespace chartloc
