#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/dataset.hpp"
#include "core/net.hpp"

namespace chartloc {

struct PsoConfig {
  int swarm_size = 100;
  int iterations = 300;
  double inertia = 0.72;
  double cognitive = 1.49;
  double social = 1.49;
  std::vector<std::pair<double, double>> bounds;  // per-dimension [lo, hi]
  std::uint64_t seed = 5;

  void validate() const;
};

struct PsoResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<double> best_trace;  // global best per iteration, non-increasing
};

// Global-best PSO with per-dimension velocity clamped to the bound width and
// positions clamped to the bounds. Deterministic given the seed; never
// returns a value worse than the best initial particle.
PsoResult pso_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const PsoConfig& cfg);

// Constant chart-frame offset: minimizes the L1 ToA residual over the
// training set by searching (b_x, b_y); b_z stays 0 since the height is
// known. Empty cfg.bounds derive a box from the chart outputs and TRPs
// padded by 5 m.
Vec3 estimate_bias(const ChartNetF& model, const Dataset& dataset,
                   const PsoConfig& cfg);

// Same objective with the chart outputs supplied directly (one 2-D point
// per time step).
Vec3 estimate_bias_from_chart(const std::vector<Eigen::Vector2d>& chart,
                              const Dataset& dataset, const PsoConfig& cfg);

// lift3d(f(Y)) - bias.
Vec3 localize(const ChartNetF& model, const Eigen::MatrixXd& feature,
              const Vec3& bias, double ue_height);
std::vector<Vec3> localize_all(const ChartNetF& model, const Dataset& dataset,
                               const Vec3& bias);

// Classical TDoA fix for one ToA vector: PSO over the plane at the known UE
// height minimizing the L1 range-difference residual against TRP 0.
// Requires at least 3 TRPs. Empty bounds: TRP bounding box padded by 5 m.
Eigen::Vector2d tdoa_pso_fix(const Eigen::VectorXd& toa,
                             const std::vector<Vec3>& trps, double ue_height,
                             const PsoConfig& cfg);

// Baseline over a whole dataset, one PSO fix per step (seeded per step).
std::vector<Vec3> tdoa_pso_baseline(const Dataset& dataset, const PsoConfig& cfg,
                                    std::size_t n_threads = 0);

}  // namespace chartloc
