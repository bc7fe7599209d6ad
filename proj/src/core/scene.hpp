#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core/geometry.hpp"

namespace chartloc {

struct SceneConfig {
  Polygon room;
  std::vector<Polygon> obstacles;
  std::vector<Vec3> trps;   // z may be NaN -> filled from trp_height
  double ue_height = 1.5;
  double trp_height = 8.0;
};

struct Scene {
  Polygon room;                   // counterclockwise
  std::vector<Polygon> obstacles; // each strictly inside the room
  std::vector<Vec3> trps;
  double ue_height = 1.5;
  double trp_height = 8.0;

  std::size_t trp_count() const { return trps.size(); }
  // Strictly inside the room and outside every obstacle.
  bool in_free_space(const Vec2& p) const;
  double clearance(const Vec2& p) const;  // distance to nearest wall/obstacle
  // Room plus obstacle outlines, the surfaces seen by the laser.
  std::vector<Polygon> solid_boundaries() const;
  void bounding_box(Vec2& lo, Vec2& hi) const;
};

// Validates the config (simple polygons, containment, positive heights,
// M >= 1) and normalizes vertex order to counterclockwise. Deterministic.
Scene build_scene(const SceneConfig& config);

SceneConfig scene_config_from_json(const std::string& json_text);
std::string scene_config_to_json(const Scene& scene);

struct Kinematics {
  double v_max = 1.5;      // m/s
  double omega_max = 1.5;  // rad/s
  double dt = 0.02;        // s
};

struct Trajectory {
  std::vector<Vec3> positions;  // z == scene.ue_height
  std::vector<double> headings; // yaw, wrapped to (-pi, pi]
  double dt = 0.02;

  std::size_t size() const { return positions.size(); }
};

// Constant-speed random walk with Ornstein-Uhlenbeck heading perturbation.
// Near walls the heading is steered (within omega_max*dt per step) toward
// free space and the speed is reduced if no admissible step exists.
Trajectory generate_trajectory(const Scene& scene, std::size_t n_steps,
                               std::uint64_t seed, const Kinematics& kin);

struct LaserConfig {
  double angular_resolution_rad = 0.6 * M_PI / 180.0;
  double noise_sigma = 0.05;  // m
  double r_max = 30.0;        // m
};

inline constexpr double kLaserNoReturn = -1.0;

struct LaserScan {
  // (r_k, phi_k) pairs; phi strictly increasing, uniform spacing; r_k is
  // kLaserNoReturn when the beam exceeds r_max.
  std::vector<std::pair<double, double>> points;
};

struct Pose2D {
  Vec2 position;
  double heading = 0.0;
};

LaserScan simulate_laser_scan(const Scene& scene, const Pose2D& pose,
                              const LaserConfig& cfg, std::uint64_t seed);

}  // namespace chartloc
