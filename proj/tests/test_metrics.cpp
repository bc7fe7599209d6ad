#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "core/channel.hpp"
#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"
#include "test_helpers.hpp"

using namespace chartloc;
using chartloc::testing::clean_channel;
using chartloc::testing::default_scene;

namespace {

// Quadratic-time reference written from the definition: full distance
// matrices, explicit rank tables, set-difference penalty sums.
double reference_trustworthiness(const Eigen::MatrixXd& true_pts,
                                 const Eigen::MatrixXd& chart_pts, int k) {
  const int n = static_cast<int>(true_pts.rows());
  auto rank_table = [n](const Eigen::MatrixXd& pts) {
    // rank[i][j]: position (1-based) of j among i's neighbors, ties by index.
    std::vector<std::vector<int>> rank(n, std::vector<int>(n, 0));
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<double, int>> order;
      for (int j = 0; j < n; ++j)
        if (j != i) order.push_back({(pts.row(i) - pts.row(j)).norm(), j});
      std::sort(order.begin(), order.end());
      for (int r = 0; r < static_cast<int>(order.size()); ++r)
        rank[i][order[r].second] = r + 1;
    }
    return rank;
  };
  const auto true_rank = rank_table(true_pts);
  const auto chart_rank = rank_table(chart_pts);

  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      // j in the chart k-NN of i but not in the true k-NN
      if (chart_rank[i][j] <= k && true_rank[i][j] > k)
        acc += true_rank[i][j] - k;
    }
  return 1.0 - 2.0 / (static_cast<double>(n) * k * (2.0 * n - 3.0 * k - 1.0)) * acc;
}

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd pts(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) pts(i, d) = rng.uniform(0, 10);
  return pts;
}

}  // namespace

TEST_CASE("identity embedding scores 1.0") {
  const Eigen::MatrixXd pts = random_points(40, 2, 1);
  CHECK(trustworthiness(pts, pts, 5) == 1.0);
  CHECK(continuity(pts, pts, 5) == 1.0);
}

TEST_CASE("similarity transforms leave TW and CT at 1.0") {
  const Eigen::MatrixXd pts = random_points(30, 2, 2);
  const double angle = 0.8;
  Eigen::Matrix2d rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Eigen::MatrixXd moved = 2.0 * pts * rot.transpose();
  moved.col(0).array() += 5.0;
  CHECK(trustworthiness(pts, moved, 4) == 1.0);
  CHECK(continuity(pts, moved, 4) == 1.0);
}

TEST_CASE("TW and CT match the quadratic reference exactly") {
  for (const int n : {20, 30}) {
    for (const int k : {1, 3, 5}) {
      const Eigen::MatrixXd a = random_points(n, 2, 100 + n);
      const Eigen::MatrixXd b = random_points(n, 2, 200 + n);
      CHECK(trustworthiness(a, b, k) == reference_trustworthiness(a, b, k));
      CHECK(continuity(a, b, k) == reference_trustworthiness(b, a, k));
    }
  }
}

TEST_CASE("continuity is trustworthiness with the spaces swapped") {
  const Eigen::MatrixXd a = random_points(25, 2, 7);
  const Eigen::MatrixXd b = random_points(25, 2, 8);
  CHECK(continuity(a, b, 3) == trustworthiness(b, a, 3));
}

TEST_CASE("TW penalizes a corrupted embedding") {
  const Eigen::MatrixXd pts = random_points(50, 2, 3);
  Eigen::MatrixXd chart = pts;
  // Teleport a few points across the cloud.
  chart.row(0) = pts.row(49);
  chart.row(10) = pts.row(30);
  chart.row(20) = pts.row(5);
  CHECK(trustworthiness(pts, chart, 5) < 1.0);
  CHECK(trustworthiness(pts, chart, 5) > 0.0);
}

TEST_CASE("TW/CT argument validation") {
  const Eigen::MatrixXd pts = random_points(10, 2, 4);
  CHECK_THROWS_AS(trustworthiness(pts, pts, 0), Error);
  CHECK_THROWS_AS(trustworthiness(pts, pts, 5), Error);  // k >= (N-1)/2
  CHECK_THROWS_AS(trustworthiness(random_points(3, 2, 5), random_points(3, 2, 6), 1),
                  Error);
  CHECK_THROWS_AS(trustworthiness(pts, random_points(9, 2, 7), 2), Error);
}

TEST_CASE("ce90 interpolates between order statistics") {
  CHECK(ce90({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) == doctest::Approx(9.1));
  CHECK(ce90({4, 2, 8, 6, 10, 3, 5, 1, 7, 9}) == doctest::Approx(9.1));  // unsorted
  CHECK(ce90({2.5, 2.5, 2.5}) == doctest::Approx(2.5));
  CHECK(ce90({7.0}) == doctest::Approx(7.0));
  CHECK_THROWS_AS(ce90({}), Error);
}

TEST_CASE("a single outlier moves ce90 by at most one order-statistic gap") {
  std::vector<double> errors;
  Rng rng(11);
  for (int i = 0; i < 99; ++i) errors.push_back(rng.uniform(0, 1));
  const double before = ce90(errors);
  errors.push_back(1e6);
  const double after = ce90(errors);
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  CHECK(after >= before);
  CHECK(after <= sorted[sorted.size() - 2] + 1e-12);  // still below the outlier
}

TEST_CASE("ce90 is monotone under pointwise domination") {
  Rng rng(13);
  std::vector<double> a, b;
  for (int i = 0; i < 64; ++i) {
    const double v = rng.uniform(0, 5);
    a.push_back(v);
    b.push_back(v + rng.uniform(0, 1));
  }
  CHECK(ce90(b) >= ce90(a));
}

TEST_CASE("evaluate_positions scores a perfect and a shifted estimate") {
  const Scene scene = default_scene();
  const Trajectory traj = generate_trajectory(scene, 120, 3, Kinematics{});
  const Dataset ds = sample_dataset(scene, traj, clean_channel(), 49, LaserConfig{}, 2);

  std::vector<Vec3> perfect(ds.n_steps);
  for (std::int64_t n = 0; n < ds.n_steps; ++n) perfect[n] = ds.true_position(n);

  const EvalReport exact = evaluate_positions(perfect, ds, 0);
  CHECK(exact.ce90 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(exact.ct == 1.0);
  CHECK(exact.tw == 1.0);
  CHECK(exact.k_neighbors == 6);  // floor(0.05 * 120)
  CHECK(exact.per_step_errors.size() == 120);

  const Vec3 shift(1.5, -2.0, 0.0);
  std::vector<Vec3> moved = perfect;
  for (Vec3& p : moved) p += shift;
  const EvalReport shifted = evaluate_positions(moved, ds, 0);
  CHECK(shifted.ce90 == doctest::Approx(shift.head<2>().norm()));
  CHECK(shifted.mean_err == doctest::Approx(shift.head<2>().norm()));
  CHECK(shifted.ct == 1.0);
  CHECK(shifted.tw == 1.0);
}

TEST_CASE("evaluation refuses a dataset without ground truth") {
  const Scene scene = default_scene();
  const Trajectory traj = generate_trajectory(scene, 50, 3, Kinematics{});
  Dataset ds = sample_dataset(scene, traj, clean_channel(), 49, LaserConfig{}, 2);
  ds.has_ground_truth = false;
  ds.ground_truth.clear();
  const std::vector<Vec3> estimates(50, Vec3(1, 1, 1.5));
  CHECK_THROWS_AS(evaluate_positions(estimates, ds, 0), Error);
}

TEST_CASE("default k is 5 percent of N, at least one") {
  CHECK(default_neighbor_count(10) == 1);
  CHECK(default_neighbor_count(120) == 6);
  CHECK(default_neighbor_count(5000) == 250);
  CHECK(default_neighbor_count(2000) == 100);
}
