#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/scene.hpp"

namespace chartloc {

struct RigidTransform2D {
  double theta = 0.0;  // wrapped to (-pi, pi]
  Vec2 translation = Vec2::Zero();

  Vec2 apply(const Vec2& p) const;
  RigidTransform2D compose(const RigidTransform2D& rhs) const;  // this after rhs
  RigidTransform2D inverse() const;
};

struct IcpConfig {
  int max_iterations = 50;
  double tol_translation = 1e-4;  // m
  double tol_rotation = 1e-4;     // rad
  double reject_distance = 0.5;   // m, correspondence gate
  double quality_gate = 0.6;      // matched_fraction gate for direct estimates
  int odometry_stride = 25;       // keyframe spacing for the odometry chain
};

struct IcpResult {
  RigidTransform2D transform;  // maps source points into the target frame
  double rms_residual = 0.0;
  double matched_fraction = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Polar beams to Cartesian body-frame points; no-return beams are dropped.
std::vector<Vec2> scan_to_points(const LaserScan& scan);

// Point-to-point ICP: nearest-neighbor correspondence with distance
// rejection, closed-form SVD rigid fit, repeat until the parameter update
// falls below tolerance. Degenerate correspondence sets (< 3 matches or a
// rank-deficient cross-covariance) yield a non-converged result.
IcpResult icp_register(const std::vector<Vec2>& source,
                       const std::vector<Vec2>& target,
                       const RigidTransform2D& init, const IcpConfig& cfg);

// Displacement magnitude between two scans of a sequence. Consecutive-scan
// ICP odometry provides initial guesses; because tiny inter-scan motion
// under ranging noise biases each link toward the identity, the cumulative
// chain is re-registered at keyframe stride (motion there is well above the
// noise floor). The refined odometry seeds a direct registration between the
// two scans; if that fit converges with enough matches its |t| is returned,
// otherwise the odometry-composed |t| with a reduced quality.
class DisplacementEstimator {
 public:
  DisplacementEstimator(std::vector<LaserScan> scans, const IcpConfig& cfg,
                        std::size_t n_threads = 0);

  // (T_hat meters, quality in [0, 1]); quality 0 when any consecutive link
  // in between failed to converge.
  std::pair<double, double> estimate(std::size_t n, std::size_t n_prime) const;

  const IcpResult& link(std::size_t n) const { return links_[n]; }

 private:
  RigidTransform2D pose(std::size_t n) const;  // body_n -> body_0, refined

  IcpConfig cfg_;
  std::vector<std::vector<Vec2>> points_;
  std::vector<IcpResult> links_;              // n -> registration of n+1 onto n
  std::vector<RigidTransform2D> raw_;         // body_n -> body_0, raw chain
  std::vector<RigidTransform2D> keyframes_;   // refined pose at n = j*stride
};

}  // namespace chartloc
