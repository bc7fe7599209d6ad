#pragma once

#include <Eigen/Dense>
#include <vector>

#include "core/dataset.hpp"
#include "core/net.hpp"

namespace chartloc {

// Rank-based neighborhood preservation in [0, 1]; rows of the inputs are
// points, one per time step. Distance ties break toward the smaller index.
// Requires N >= 4 and 1 <= k < (N-1)/2.
double trustworthiness(const Eigen::MatrixXd& true_pts,
                       const Eigen::MatrixXd& chart_pts, int k);

// Same score with the roles of the two spaces swapped.
double continuity(const Eigen::MatrixXd& true_pts,
                  const Eigen::MatrixXd& chart_pts, int k);

// Empirical 90th percentile with linear interpolation between order
// statistics.
double ce90(const std::vector<double>& errors);
double percentile(const std::vector<double>& values, double q);

struct EvalReport {
  double ct = 0.0;
  double tw = 0.0;
  double ce90 = 0.0;
  double mean_err = 0.0;
  int k_neighbors = 0;
  std::vector<double> per_step_errors;  // planar, meters
};

int default_neighbor_count(std::size_t n_steps);  // max(1, floor(0.05 N))

// Planar errors of the given estimates against ground truth, plus CT/TW
// between the true and estimated (x, y) sets. k <= 0 picks the default.
EvalReport evaluate_positions(const std::vector<Vec3>& estimates,
                              const Dataset& dataset, int k);

// Full model route: localize every step with the bias, then score.
EvalReport evaluate(const ChartNetF& model, const Vec3& bias,
                    const Dataset& dataset, int k);

}  // namespace chartloc
