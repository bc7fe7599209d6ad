#include "core/icp.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <unordered_map>

#include "core/common.hpp"
#include "core/threading.hpp"

namespace chartloc {

namespace {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

// Uniform grid over the target cloud; cell size equals the rejection
// distance so a query only has to look at the 3x3 neighborhood.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Vec2>& points, double cell)
      : points_(points), inv_cell_(1.0 / cell) {
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      cells_[key(points[i])].push_back(i);
  }

  // Index of the nearest point within max_dist, or -1.
  int nearest(const Vec2& q, double max_dist) const {
    const auto cx = static_cast<std::int64_t>(std::floor(q.x() * inv_cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(q.y() * inv_cell_));
    int best = -1;
    double best_d2 = max_dist * max_dist;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells_.find(pack(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (const std::size_t i : it->second) {
          const double d2 = (points_[i] - q).squaredNorm();
          if (d2 <= best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
          }
        }
      }
    }
    return best;
  }

 private:
  static std::int64_t pack(std::int64_t x, std::int64_t y) {
    return (x << 32) ^ (y & 0xffffffff);
  }
  std::int64_t key(const Vec2& p) const {
    return pack(static_cast<std::int64_t>(std::floor(p.x() * inv_cell_)),
                static_cast<std::int64_t>(std::floor(p.y() * inv_cell_)));
  }

  const std::vector<Vec2>& points_;
  double inv_cell_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

Vec2 RigidTransform2D::apply(const Vec2& p) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return Vec2(c * p.x() - s * p.y() + translation.x(),
              s * p.x() + c * p.y() + translation.y());
}

RigidTransform2D RigidTransform2D::compose(const RigidTransform2D& rhs) const {
  RigidTransform2D out;
  out.theta = wrap_angle(theta + rhs.theta);
  out.translation = apply(rhs.translation);
  return out;
}

RigidTransform2D RigidTransform2D::inverse() const {
  RigidTransform2D out;
  out.theta = wrap_angle(-theta);
  const double c = std::cos(theta), s = std::sin(theta);
  out.translation = Vec2(-(c * translation.x() + s * translation.y()),
                         -(-s * translation.x() + c * translation.y()));
  return out;
}

std::vector<Vec2> scan_to_points(const LaserScan& scan) {
  std::vector<Vec2> pts;
  pts.reserve(scan.points.size());
  for (const auto& [r, phi] : scan.points) {
    if (r <= 0.0) continue;  // no-return sentinel
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi));
  }
  return pts;
}

IcpResult icp_register(const std::vector<Vec2>& source,
                       const std::vector<Vec2>& target,
                       const RigidTransform2D& init, const IcpConfig& cfg) {
  IcpResult result;
  result.transform = init;
  if (source.size() < 3 || target.size() < 3) return result;

  const NeighborGrid grid(target, cfg.reject_distance);
  RigidTransform2D cur = init;
  double prev_mse = std::numeric_limits<double>::infinity();

  std::vector<int> match(source.size());
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    std::size_t n_matched = 0;
    Vec2 mu_s = Vec2::Zero(), mu_t = Vec2::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
      match[i] = grid.nearest(cur.apply(source[i]), cfg.reject_distance);
      if (match[i] >= 0) {
        ++n_matched;
        mu_s += source[i];
        mu_t += target[match[i]];
      }
    }
    result.iterations = iter;
    result.matched_fraction =
        static_cast<double>(n_matched) / static_cast<double>(source.size());
    if (n_matched < 3) {
      result.converged = false;
      result.transform = cur;
      return result;
    }
    mu_s /= static_cast<double>(n_matched);
    mu_t /= static_cast<double>(n_matched);

    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      h += (source[i] - mu_s) * (target[match[i]] - mu_t).transpose();
    }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(1) < 1e-12 * std::max(svd.singularValues()(0), 1e-300)) {
      result.converged = false;
      result.transform = cur;
      return result;
    }
    Eigen::Matrix2d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
      Eigen::Matrix2d flip = Eigen::Matrix2d::Identity();
      flip(1, 1) = -1.0;
      r = svd.matrixV() * flip * svd.matrixU().transpose();
    }

    RigidTransform2D next;
    next.theta = std::atan2(r(1, 0), r(0, 0));
    next.translation = mu_t - r * mu_s;

    double mse = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (match[i] < 0) continue;
      mse += (next.apply(source[i]) - target[match[i]]).squaredNorm();
    }
    mse /= static_cast<double>(n_matched);

    const double d_theta = std::abs(wrap_angle(next.theta - cur.theta));
    const double d_trans = (next.translation - cur.translation).norm();
    cur = next;
    // Parameter-change rule, plus the mean-square-error plateau rule for
    // noisy clouds where correspondence jitter keeps the parameters moving.
    if ((d_theta < cfg.tol_rotation && d_trans < cfg.tol_translation) ||
        (iter > 1 && std::abs(prev_mse - mse) <= 1e-4 * std::max(mse, 1e-12))) {
      result.converged = true;
      break;
    }
    prev_mse = mse;
  }

  result.transform = cur;
  double sq_sum = 0.0;
  std::size_t n_matched = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (match[i] < 0) continue;
    sq_sum += (cur.apply(source[i]) - target[match[i]]).squaredNorm();
    ++n_matched;
  }
  result.rms_residual = n_matched ? std::sqrt(sq_sum / n_matched) : 0.0;
  return result;
}

namespace {

// Interpolates along the scan contour so the target cloud approximates the
// measured surface instead of a sparse angular sampling; point-to-point NN
// against it behaves like point-to-curve and removes the beam-quantization
// floor. Pairs farther apart than max_gap are treated as depth edges and
// not bridged.
std::vector<Vec2> densify_contour(const std::vector<Vec2>& pts,
                                  double max_gap = 0.5, double step = 0.04) {
  if (pts.size() < 2) return pts;
  std::vector<Vec2> out;
  out.reserve(pts.size() * 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % pts.size()];
    out.push_back(a);
    const double gap = (b - a).norm();
    if (gap >= max_gap) continue;
    const int n_mid = static_cast<int>(gap / step);
    for (int j = 1; j <= n_mid; ++j)
      out.push_back(a + (static_cast<double>(j) / (n_mid + 1)) * (b - a));
  }
  return out;
}

}  // namespace

DisplacementEstimator::DisplacementEstimator(std::vector<LaserScan> scans,
                                             const IcpConfig& cfg,
                                             std::size_t n_threads)
    : cfg_(cfg) {
  require(!scans.empty(), "displacement estimator needs at least one scan");
  require(cfg.odometry_stride >= 1, "odometry stride must be >= 1");
  points_.resize(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i)
    points_[i] = scan_to_points(scans[i]);

  const auto register_onto = [this](std::size_t src, std::size_t tgt,
                                    const RigidTransform2D& init) {
    return icp_register(points_[src], densify_contour(points_[tgt]), init, cfg_);
  };

  const std::size_t n_links = scans.size() - 1;
  links_.resize(n_links);
  parallel_for_chunked(
      n_links, 64,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
          links_[i] = register_onto(i + 1, i, {});
      },
      n_threads);

  raw_.resize(scans.size());
  raw_[0] = {};
  for (std::size_t i = 0; i < n_links; ++i)
    raw_[i + 1] = raw_[i].compose(links_[i].transform);

  // Keyframe refinement: one registration per stride, seeded by the raw
  // chain over that stride, composed in order.
  const auto stride = static_cast<std::size_t>(cfg.odometry_stride);
  const std::size_t n_keys = n_links / stride;
  std::vector<RigidTransform2D> refined(n_keys);
  parallel_for_chunked(
      n_keys, 16,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
          const std::size_t a = j * stride;
          const std::size_t b = a + stride;
          const RigidTransform2D init = raw_[a].inverse().compose(raw_[b]);
          const IcpResult res = register_onto(b, a, init);
          const bool ok =
              res.converged && res.matched_fraction >= cfg_.quality_gate;
          refined[j] = ok ? res.transform : init;
        }
      },
      n_threads);

  keyframes_.resize(n_keys + 1);
  keyframes_[0] = {};
  for (std::size_t j = 0; j < n_keys; ++j)
    keyframes_[j + 1] = keyframes_[j].compose(refined[j]);
}

RigidTransform2D DisplacementEstimator::pose(std::size_t n) const {
  const auto stride = static_cast<std::size_t>(cfg_.odometry_stride);
  const std::size_t key = std::min(n / stride, keyframes_.size() - 1);
  const RigidTransform2D tail = raw_[key * stride].inverse().compose(raw_[n]);
  return keyframes_[key].compose(tail);
}

std::pair<double, double> DisplacementEstimator::estimate(std::size_t n,
                                                          std::size_t n_prime) const {
  require(n < points_.size() && n_prime < points_.size(),
          "scan index out of range");
  if (n == n_prime) return {0.0, 1.0};

  const std::size_t lo = std::min(n, n_prime);
  const std::size_t hi = std::max(n, n_prime);
  double min_mf = 1.0;
  bool all_converged = true;
  for (std::size_t i = lo; i < hi; ++i) {
    all_converged = all_converged && links_[i].converged;
    min_mf = std::min(min_mf, links_[i].matched_fraction);
  }
  const RigidTransform2D odo = pose(n).inverse().compose(pose(n_prime));
  if (!all_converged) return {odo.translation.norm(), 0.0};

  const IcpResult direct =
      icp_register(points_[n_prime], densify_contour(points_[n]), odo, cfg_);
  if (direct.converged && direct.matched_fraction >= cfg_.quality_gate)
    return {direct.transform.translation.norm(), direct.matched_fraction};
  return {odo.translation.norm(), 0.5 * min_mf};
}

}  // namespace chartloc
