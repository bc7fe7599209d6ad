#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "core/channel.hpp"

namespace chartloc {

using CirFeature = Eigen::MatrixXd;  // M x c_bar, nonnegative magnitudes

// Element-wise modulus of the first c_bar columns.
CirFeature truncate_and_abs(const CirMatrix& cir, int c_bar);

// Per-row ToA from the largest tap: tau_m = argmax_c / sample_rate, ties
// broken toward the smaller index. Errors on an all-zero row.
Eigen::VectorXd extract_toa(const CirFeature& feature, double sample_rate_hz);

// Per-row received power in dB: 20*log10 of the row Frobenius norm.
Eigen::VectorXd compute_rx_power(const CirFeature& feature);

struct Dataset;

// Power-distance diagnostic: fraction of sampled (n_close, n_far, m) triples
// (ordered by true distance to TRP m) whose row powers satisfy
// gamma_close > gamma_far + margin_db. Requires ground truth.
double check_power_distance(const Dataset& dataset, double margin_db,
                            std::size_t n_triples, std::uint64_t seed);

}  // namespace chartloc
