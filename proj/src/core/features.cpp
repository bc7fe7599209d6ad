#include "core/features.hpp"

#include <cmath>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/rng.hpp"

namespace chartloc {

CirFeature truncate_and_abs(const CirMatrix& cir, int c_bar) {
  require(c_bar >= 1 && c_bar <= cir.cols(), "c_bar out of range");
  return cir.leftCols(c_bar).cwiseAbs();
}

Eigen::VectorXd extract_toa(const CirFeature& feature, double sample_rate_hz) {
  require(sample_rate_hz > 0, "sample rate must be positive");
  Eigen::VectorXd toa(feature.rows());
  for (Eigen::Index m = 0; m < feature.rows(); ++m) {
    Eigen::Index best = 0;
    double best_val = feature(m, 0);
    for (Eigen::Index c = 1; c < feature.cols(); ++c) {
      if (feature(m, c) > best_val) {  // strict: ties keep the smaller index
        best_val = feature(m, c);
        best = c;
      }
    }
    require(best_val > 0.0, "all-zero CIR row: no detectable path",
            ErrorCode::numeric);
    toa(m) = static_cast<double>(best) / sample_rate_hz;
  }
  return toa;
}

Eigen::VectorXd compute_rx_power(const CirFeature& feature) {
  Eigen::VectorXd gamma(feature.rows());
  for (Eigen::Index m = 0; m < feature.rows(); ++m) {
    const double norm = feature.row(m).norm();
    require(norm > 0.0, "all-zero CIR row: power undefined", ErrorCode::numeric);
    gamma(m) = 20.0 * std::log10(norm);
  }
  return gamma;
}

double check_power_distance(const Dataset& dataset, double margin_db,
                            std::size_t n_triples, std::uint64_t seed) {
  require(dataset.has_ground_truth, "power-distance check needs ground truth");
  require(dataset.n_steps >= 2, "need at least two time steps");
  require(n_triples >= 1, "need at least one triple");

  // Row powers once, from the stored magnitude features.
  Eigen::MatrixXd gamma(dataset.n_steps, dataset.n_trps);
  for (std::int64_t n = 0; n < dataset.n_steps; ++n)
    gamma.row(n) = compute_rx_power(dataset.feature_matrix(n)).transpose();

  Rng rng(derive_seed(seed, 0xD1A6));
  std::size_t satisfied = 0;
  std::size_t counted = 0;
  while (counted < n_triples) {
    const auto n1 = static_cast<std::int64_t>(rng.uniform_index(dataset.n_steps));
    const auto n2 = static_cast<std::int64_t>(rng.uniform_index(dataset.n_steps));
    const auto m = static_cast<std::int64_t>(rng.uniform_index(dataset.n_trps));
    if (n1 == n2) continue;
    const Vec3 trp = dataset.trps[m];
    const double d1 = (dataset.true_position(n1) - trp).norm();
    const double d2 = (dataset.true_position(n2) - trp).norm();
    if (d1 == d2) continue;
    const auto nc = d1 < d2 ? n1 : n2;
    const auto nf = d1 < d2 ? n2 : n1;
    ++counted;
    if (gamma(nc, m) > gamma(nf, m) + margin_db) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(n_triples);
}

}  // namespace chartloc
