#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "core/scene.hpp"

namespace chartloc {

struct ChannelParams {
  double bandwidth_hz = 100e6;
  double sample_rate_hz = 122.88e6;
  int n_taps = 64;
  double carrier_wavelength = 0.0857;  // reserved; magnitudes only downstream
  double snr_db = 25.0;                // +inf disables noise
  double reflection_coeff = 0.5;       // 0 disables wall reflections

  void validate() const;
};

using CirMatrix = Eigen::MatrixXcd;  // M x C, row m = delay taps for TRP m

struct PropagationPath {
  double delay_s = 0.0;
  double amplitude = 0.0;  // 1/path_length
};

// Deterministic geometry part of the channel: LoS plus one first-order
// image-source reflection per room wall whose specular point lies on the
// wall segment. First entry is always the LoS path.
std::vector<PropagationPath> propagation_paths(const Scene& scene,
                                               const Vec3& ue_position,
                                               std::size_t trp_index,
                                               double reflection_coeff);

// Bandlimited pulse sampled at offset `x` taps from the path delay:
// sinc(bandwidth/fs * x) under a raised-cosine window of half-width
// kPulseHalfWidth taps. Peak value 1 at x = 0.
inline constexpr int kPulseHalfWidth = 8;
double pulse_amplitude(double x_taps, double bandwidth_hz, double sample_rate_hz);

// Complex CIR of all TRPs for one UE position: each path deposits an
// amplitude/random-phase pulse on the delay grid, then AWGN at snr_db
// relative to the row's nominal LoS tap power.
CirMatrix synthesize_cir(const Scene& scene, const Vec3& ue_position,
                         const ChannelParams& params, std::uint64_t seed);

struct Dataset;

// Full measurement bundle along a trajectory: per step, CIR -> truncated
// magnitude feature and ToA vector, plus a laser scan and the ground-truth
// position (stored for evaluation only). Steps are synthesized in parallel;
// output depends only on the inputs and seed.
Dataset sample_dataset(const Scene& scene, const Trajectory& trajectory,
                       const ChannelParams& params, int c_bar,
                       const LaserConfig& laser_cfg, std::uint64_t seed,
                       std::size_t n_threads = 0);

}  // namespace chartloc
