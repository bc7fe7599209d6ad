#include "core/pso.hpp"

#include <cmath>

#include "core/common.hpp"
#include "core/loss.hpp"
#include "core/rng.hpp"
#include "core/threading.hpp"

namespace chartloc {

void PsoConfig::validate() const {
  require(swarm_size >= 2, "swarm needs at least 2 particles");
  require(iterations >= 1, "need at least one iteration");
  require(inertia > 0.0 && inertia <= 1.0, "inertia must be in (0, 1]");
  require(cognitive > 0.0 && social > 0.0, "c1 and c2 must be positive");
  require(!bounds.empty(), "search bounds are required");
  for (const auto& [lo, hi] : bounds)
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
            "bounds must be finite with lo < hi");
}

PsoResult pso_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const PsoConfig& cfg) {
  cfg.validate();
  const int dim = static_cast<int>(cfg.bounds.size());
  const int swarm = cfg.swarm_size;
  Rng rng(derive_seed(cfg.seed, 0x9507));

  Eigen::MatrixXd pos(dim, swarm), vel = Eigen::MatrixXd::Zero(dim, swarm);
  Eigen::MatrixXd best_pos(dim, swarm);
  Eigen::VectorXd best_val(swarm);
  Eigen::VectorXd range(dim);
  for (int d = 0; d < dim; ++d) range(d) = cfg.bounds[d].second - cfg.bounds[d].first;

  PsoResult result;
  result.value = std::numeric_limits<double>::infinity();
  for (int p = 0; p < swarm; ++p) {
    for (int d = 0; d < dim; ++d)
      pos(d, p) = rng.uniform(cfg.bounds[d].first, cfg.bounds[d].second);
    best_pos.col(p) = pos.col(p);
    best_val(p) = objective(pos.col(p));
    if (best_val(p) < result.value) {
      result.value = best_val(p);
      result.x = pos.col(p);
    }
  }

  result.best_trace.reserve(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int p = 0; p < swarm; ++p) {
      for (int d = 0; d < dim; ++d) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        double v = cfg.inertia * vel(d, p) +
                   cfg.cognitive * r1 * (best_pos(d, p) - pos(d, p)) +
                   cfg.social * r2 * (result.x(d) - pos(d, p));
        v = std::clamp(v, -range(d), range(d));
        vel(d, p) = v;
        pos(d, p) = std::clamp(pos(d, p) + v, cfg.bounds[d].first, cfg.bounds[d].second);
      }
      const double val = objective(pos.col(p));
      if (val < best_val(p)) {
        best_val(p) = val;
        best_pos.col(p) = pos.col(p);
        if (val < result.value) {
          result.value = val;
          result.x = pos.col(p);
        }
      }
    }
    result.best_trace.push_back(result.value);
  }
  return result;
}

namespace {

std::vector<std::pair<double, double>> padded_box(
    const std::vector<Eigen::Vector2d>& pts, double pad) {
  Eigen::Vector2d lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {{lo.x() - pad, hi.x() + pad}, {lo.y() - pad, hi.y() + pad}};
}

}  // namespace

Vec3 estimate_bias(const ChartNetF& model, const Dataset& dataset,
                   const PsoConfig& cfg) {
  require(dataset.n_steps >= 1, "empty dataset");
  const auto n = static_cast<std::size_t>(dataset.n_steps);
  std::vector<Eigen::Vector2d> chart(n);
  parallel_for_chunked(n, 128, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      chart[i] = model.forward(dataset.feature_matrix(i));
  });
  return estimate_bias_from_chart(chart, dataset, cfg);
}

Vec3 estimate_bias_from_chart(const std::vector<Eigen::Vector2d>& chart,
                              const Dataset& dataset, const PsoConfig& cfg) {
  const auto n = static_cast<std::size_t>(dataset.n_steps);
  const auto m_count = static_cast<std::size_t>(dataset.n_trps);
  require(chart.size() == n, "one chart point per time step required");

  PsoConfig resolved = cfg;
  if (resolved.bounds.empty()) {
    std::vector<Eigen::Vector2d> pts = chart;
    for (const Vec3& t : dataset.trps) pts.push_back(t.head<2>());
    resolved.bounds = padded_box(pts, 5.0);
  }
  require(resolved.bounds.size() == 2, "bias search is over (b_x, b_y)");

  // L1 ToA residual, expressed in meters (same minimizer).
  const auto objective = [&](const Eigen::VectorXd& b) {
    double acc = 0.0;
    const double h = dataset.ue_height;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 u(chart[i].x() - b(0), chart[i].y() - b(1), h);
      for (std::size_t m = 0; m < m_count; ++m) {
        const double range_hat = (u - dataset.trps[m]).norm();
        const double range_meas =
            static_cast<double>(dataset.toa[i * m_count + m]) * kSpeedOfLight;
        acc += std::abs(range_hat - range_meas);
      }
    }
    return acc;
  };

  const PsoResult res = pso_minimize(objective, resolved);
  return Vec3(res.x(0), res.x(1), 0.0);
}

Vec3 localize(const ChartNetF& model, const Eigen::MatrixXd& feature,
              const Vec3& bias, double ue_height) {
  return lift3d(model.forward(feature), ue_height) - bias;
}

std::vector<Vec3> localize_all(const ChartNetF& model, const Dataset& dataset,
                               const Vec3& bias) {
  const auto n = static_cast<std::size_t>(dataset.n_steps);
  std::vector<Vec3> out(n);
  parallel_for_chunked(n, 128, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      out[i] = localize(model, dataset.feature_matrix(i), bias, dataset.ue_height);
  });
  return out;
}

Eigen::Vector2d tdoa_pso_fix(const Eigen::VectorXd& toa,
                             const std::vector<Vec3>& trps, double ue_height,
                             const PsoConfig& cfg) {
  require(trps.size() >= 3, "TDoA triangulation needs at least 3 TRPs");
  require(static_cast<std::size_t>(toa.size()) == trps.size(),
          "ToA vector length disagrees with TRP count");

  PsoConfig resolved = cfg;
  if (resolved.bounds.empty()) {
    std::vector<Eigen::Vector2d> pts;
    for (const Vec3& t : trps) pts.push_back(t.head<2>());
    resolved.bounds = padded_box(pts, 5.0);
  }
  require(resolved.bounds.size() == 2, "TDoA search is over (x, y)");

  const auto objective = [&](const Eigen::VectorXd& p) {
    const Vec3 u(p(0), p(1), ue_height);
    const double r0 = (trps[0] - u).norm();
    double acc = 0.0;
    for (std::size_t m = 1; m < trps.size(); ++m) {
      const double dr = (trps[m] - u).norm() - r0;
      const double dtau = (toa(static_cast<Eigen::Index>(m)) - toa(0)) * kSpeedOfLight;
      acc += std::abs(dr - dtau);
    }
    return acc;
  };

  return pso_minimize(objective, resolved).x;
}

std::vector<Vec3> tdoa_pso_baseline(const Dataset& dataset, const PsoConfig& cfg,
                                    std::size_t n_threads) {
  require(dataset.n_trps >= 3, "TDoA baseline needs at least 3 TRPs");
  const auto n = static_cast<std::size_t>(dataset.n_steps);
  std::vector<Vec3> out(n);
  parallel_for_chunked(
      n, 32,
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          PsoConfig per_step = cfg;
          per_step.seed = derive_seed(cfg.seed, i);
          const Eigen::Vector2d p = tdoa_pso_fix(dataset.toa_vector(i),
                                                 dataset.trps, dataset.ue_height,
                                                 per_step);
          out[i] = Vec3(p.x(), p.y(), dataset.ue_height);
        }
      },
      n_threads);
  return out;
}

}  // namespace chartloc
