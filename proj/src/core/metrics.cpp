#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/common.hpp"
#include "core/pso.hpp"
#include "core/threading.hpp"

namespace chartloc {

namespace {

// Neighbor ranking of every other point around `i`, ties by index.
std::vector<int> ranked_neighbors(const Eigen::MatrixXd& pts, int i) {
  const int n = static_cast<int>(pts.rows());
  std::vector<int> order;
  order.reserve(n - 1);
  for (int j = 0; j < n; ++j)
    if (j != i) order.push_back(j);
  std::vector<double> d2(n);
  for (int j = 0; j < n; ++j) d2[j] = (pts.row(j) - pts.row(i)).squaredNorm();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
  });
  return order;
}

}  // namespace

double trustworthiness(const Eigen::MatrixXd& true_pts,
                       const Eigen::MatrixXd& chart_pts, int k) {
  const int n = static_cast<int>(true_pts.rows());
  require(chart_pts.rows() == n, "point sets must have equal size");
  require(n >= 4, "need at least 4 points");
  require(k >= 1 && 2 * k < n - 1, "k out of range: need 1 <= k < (N-1)/2");

  std::vector<double> penalties(n, 0.0);
  parallel_for_chunked(n, 64, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto true_order = ranked_neighbors(true_pts, static_cast<int>(i));
      const auto chart_order = ranked_neighbors(chart_pts, static_cast<int>(i));
      // rank of j in the true ordering (1-based), and the true k-NN set
      std::vector<int> true_rank(n, 0);
      for (int r = 0; r < static_cast<int>(true_order.size()); ++r)
        true_rank[true_order[r]] = r + 1;
      double acc = 0.0;
      for (int r = 0; r < k; ++r) {
        const int j = chart_order[r];
        if (true_rank[j] > k) acc += true_rank[j] - k;
      }
      penalties[i] = acc;
    }
  });

  const double total = std::accumulate(penalties.begin(), penalties.end(), 0.0);
  const double norm = 2.0 / (static_cast<double>(n) * k * (2.0 * n - 3.0 * k - 1.0));
  return 1.0 - norm * total;
}

double continuity(const Eigen::MatrixXd& true_pts,
                  const Eigen::MatrixXd& chart_pts, int k) {
  return trustworthiness(chart_pts, true_pts, k);
}

double percentile(const std::vector<double>& values, double q) {
  require(!values.empty(), "percentile of an empty list");
  require(q >= 0.0 && q <= 1.0, "quantile must be in [0, 1]");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double ce90(const std::vector<double>& errors) { return percentile(errors, 0.9); }

int default_neighbor_count(std::size_t n_steps) {
  return std::max(1, static_cast<int>(0.05 * static_cast<double>(n_steps)));
}

EvalReport evaluate_positions(const std::vector<Vec3>& estimates,
                              const Dataset& dataset, int k) {
  require(dataset.has_ground_truth, "evaluation needs ground truth");
  const auto n = static_cast<std::size_t>(dataset.n_steps);
  require(estimates.size() == n, "position count disagrees with the dataset");

  EvalReport report;
  report.k_neighbors = k > 0 ? k : default_neighbor_count(n);

  Eigen::MatrixXd true_xy(n, 2), est_xy(n, 2);
  report.per_step_errors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 truth = dataset.true_position(i);
    true_xy(i, 0) = truth.x();
    true_xy(i, 1) = truth.y();
    est_xy(i, 0) = estimates[i].x();
    est_xy(i, 1) = estimates[i].y();
    report.per_step_errors[i] =
        (estimates[i].head<2>() - truth.head<2>()).norm();
  }

  report.tw = trustworthiness(true_xy, est_xy, report.k_neighbors);
  report.ct = continuity(true_xy, est_xy, report.k_neighbors);
  report.ce90 = ce90(report.per_step_errors);
  report.mean_err =
      std::accumulate(report.per_step_errors.begin(), report.per_step_errors.end(), 0.0) /
      static_cast<double>(n);
  return report;
}

EvalReport evaluate(const ChartNetF& model, const Vec3& bias,
                    const Dataset& dataset, int k) {
  return evaluate_positions(localize_all(model, dataset, bias), dataset, k);
}

}  // namespace chartloc
