#include "core/channel.hpp"

#include <cmath>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/features.hpp"
#include "core/rng.hpp"
#include "core/threading.hpp"

namespace chartloc {

void ChannelParams::validate() const {
  require(bandwidth_hz > 0, "bandwidth must be positive");
  require(sample_rate_hz >= bandwidth_hz, "sample rate must be >= bandwidth");
  require(n_taps >= 1, "need at least one tap");
  require(carrier_wavelength > 0, "carrier wavelength must be positive");
  require(reflection_coeff >= 0.0 && reflection_coeff <= 1.0,
          "reflection coefficient must be in [0, 1]");
}

double pulse_amplitude(double x_taps, double bandwidth_hz, double sample_rate_hz) {
  const double ax = std::abs(x_taps);
  if (ax >= kPulseHalfWidth) return 0.0;
  const double u = (bandwidth_hz / sample_rate_hz) * x_taps;
  const double sinc = std::abs(u) < 1e-12 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
  const double window = 0.5 * (1.0 + std::cos(M_PI * x_taps / kPulseHalfWidth));
  return sinc * window;
}

std::vector<PropagationPath> propagation_paths(const Scene& scene,
                                               const Vec3& ue_position,
                                               std::size_t trp_index,
                                               double reflection_coeff) {
  require(trp_index < scene.trps.size(), "TRP index out of range");
  const Vec3& trp = scene.trps[trp_index];

  std::vector<PropagationPath> paths;
  const double d_los = (trp - ue_position).norm();
  require(d_los > 1e-9, "UE coincides with a TRP");
  paths.push_back({d_los / kSpeedOfLight, 1.0 / d_los});

  if (reflection_coeff <= 0.0) return paths;

  const std::size_t n = scene.room.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = scene.room[i];
    const Vec2& b = scene.room[(i + 1) % n];
    const Vec2 image_xy = reflect_across_line(trp.head<2>(), a, b);
    const Vec3 image(image_xy.x(), image_xy.y(), trp.z());

    // Specular point: where the straight image->UE segment crosses the wall
    // line; the bounce is real only if that point is on the wall segment.
    const Vec2 seg = ue_position.head<2>() - image_xy;
    const Vec2 wall = b - a;
    const double denom = seg.x() * wall.y() - seg.y() * wall.x();
    if (std::abs(denom) < 1e-12) continue;
    const Vec2 am = a - image_xy;
    const double t = (am.x() * wall.y() - am.y() * wall.x()) / denom;  // along seg
    const double u = (am.x() * seg.y() - am.y() * seg.x()) / denom;    // along wall
    if (t <= 0.0 || t >= 1.0 || u < 0.0 || u > 1.0) continue;

    const double d_path = (image - ue_position).norm();
    paths.push_back({d_path / kSpeedOfLight, reflection_coeff / d_path});
  }
  return paths;
}

CirMatrix synthesize_cir(const Scene& scene, const Vec3& ue_position,
                         const ChannelParams& params, std::uint64_t seed) {
  params.validate();
  require(scene.in_free_space(ue_position.head<2>()), "UE outside free space");

  const std::size_t m_count = scene.trp_count();
  const int c_count = params.n_taps;
  CirMatrix taps = CirMatrix::Zero(m_count, c_count);

  Rng rng(derive_seed(seed, 0xC1F));
  const bool noisy = std::isfinite(params.snr_db);

  for (std::size_t m = 0; m < m_count; ++m) {
    const auto paths =
        propagation_paths(scene, ue_position, m, params.reflection_coeff);
    for (const PropagationPath& path : paths) {
      const double center = path.delay_s * params.sample_rate_hz;
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const std::complex<double> gain =
          path.amplitude * std::complex<double>(std::cos(phase), std::sin(phase));
      const int c_lo = std::max(0, static_cast<int>(std::ceil(center - kPulseHalfWidth)));
      const int c_hi = std::min(c_count - 1,
                                static_cast<int>(std::floor(center + kPulseHalfWidth)));
      for (int c = c_lo; c <= c_hi; ++c) {
        taps(m, c) += gain * pulse_amplitude(c - center, params.bandwidth_hz,
                                             params.sample_rate_hz);
      }
    }
    if (noisy) {
      // Noise level pinned to the nominal LoS tap power of this row.
      const double p_los = paths.front().amplitude * paths.front().amplitude;
      const double sigma =
          std::sqrt(p_los / std::pow(10.0, params.snr_db / 10.0) / 2.0);
      for (int c = 0; c < c_count; ++c) {
        const double re = rng.normal(0.0, sigma);
        const double im = rng.normal(0.0, sigma);
        taps(m, c) += std::complex<double>(re, im);
      }
    }
  }
  return taps;
}

Dataset sample_dataset(const Scene& scene, const Trajectory& trajectory,
                       const ChannelParams& params, int c_bar,
                       const LaserConfig& laser_cfg, std::uint64_t seed,
                       std::size_t n_threads) {
  params.validate();
  require(c_bar >= 1 && c_bar <= params.n_taps, "c_bar out of range");
  require(trajectory.size() >= 1, "empty trajectory");

  const std::int64_t n_steps = trajectory.size();
  const std::int64_t m_count = scene.trp_count();
  const auto n_beams = static_cast<std::int64_t>(
      std::ceil(2.0 * M_PI / laser_cfg.angular_resolution_rad));

  Dataset ds;
  ds.n_steps = n_steps;
  ds.n_trps = m_count;
  ds.c_bar = c_bar;
  ds.n_beams = n_beams;
  ds.sample_rate_hz = params.sample_rate_hz;
  ds.dt = trajectory.dt;
  ds.ue_height = scene.ue_height;
  ds.trps = scene.trps;
  ds.has_laser = true;
  ds.has_ground_truth = true;
  ds.features.resize(n_steps * m_count * c_bar);
  ds.toa.resize(n_steps * m_count);
  ds.laser.resize(n_steps * n_beams * 2);
  ds.ground_truth.resize(n_steps * 3);

  parallel_for_chunked(
      n_steps, 64,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
          const Vec3& u = trajectory.positions[n];
          const CirMatrix cir =
              synthesize_cir(scene, u, params, derive_seed(seed, 2 * n));
          const CirFeature y = truncate_and_abs(cir, c_bar);
          const Eigen::VectorXd tau = extract_toa(y, params.sample_rate_hz);

          float* y_out = ds.features.data() + n * m_count * c_bar;
          for (std::int64_t m = 0; m < m_count; ++m)
            for (std::int64_t c = 0; c < c_bar; ++c)
              y_out[m * c_bar + c] = static_cast<float>(y(m, c));
          float* t_out = ds.toa.data() + n * m_count;
          for (std::int64_t m = 0; m < m_count; ++m)
            t_out[m] = static_cast<float>(tau(m));

          const Pose2D pose{u.head<2>(), trajectory.headings[n]};
          const LaserScan scan =
              simulate_laser_scan(scene, pose, laser_cfg, derive_seed(seed, 2 * n + 1));
          float* l_out = ds.laser.data() + n * n_beams * 2;
          for (std::int64_t k = 0; k < n_beams; ++k) {
            l_out[2 * k] = static_cast<float>(scan.points[k].first);
            l_out[2 * k + 1] = static_cast<float>(scan.points[k].second);
          }

          float* g_out = ds.ground_truth.data() + n * 3;
          g_out[0] = static_cast<float>(u.x());
          g_out[1] = static_cast<float>(u.y());
          g_out[2] = static_cast<float>(u.z());
        }
      },
      n_threads);
  return ds;
}

}  // namespace chartloc
