#include "core/scene.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "core/common.hpp"
#include "core/rng.hpp"

namespace chartloc {

namespace {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

Polygon to_ccw(Polygon poly) {
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

}  // namespace

bool Scene::in_free_space(const Vec2& p) const {
  if (!point_in_polygon(p, room)) return false;
  for (const Polygon& obs : obstacles) {
    if (point_in_polygon(p, obs) || distance_to_boundary(p, obs) == 0.0) return false;
  }
  return true;
}

double Scene::clearance(const Vec2& p) const {
  double d = distance_to_boundary(p, room);
  for (const Polygon& obs : obstacles) d = std::min(d, distance_to_boundary(p, obs));
  return d;
}

std::vector<Polygon> Scene::solid_boundaries() const {
  std::vector<Polygon> polys;
  polys.reserve(1 + obstacles.size());
  polys.push_back(room);
  for (const Polygon& obs : obstacles) polys.push_back(obs);
  return polys;
}

void Scene::bounding_box(Vec2& lo, Vec2& hi) const {
  lo = room.front();
  hi = room.front();
  for (const Vec2& v : room) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

Scene build_scene(const SceneConfig& config) {
  require(config.room.size() >= 3, "room polygon needs at least 3 vertices");
  require(polygon_is_simple(config.room), "room polygon is self-intersecting");
  require(config.ue_height > 0.0, "ue_height must be positive");
  require(config.trp_height > 0.0, "trp_height must be positive");
  require(!config.trps.empty(), "at least one TRP is required");

  Scene scene;
  scene.room = to_ccw(config.room);
  scene.ue_height = config.ue_height;
  scene.trp_height = config.trp_height;

  for (const Polygon& obs : config.obstacles) {
    require(obs.size() >= 3, "obstacle polygon needs at least 3 vertices");
    require(polygon_is_simple(obs), "obstacle polygon is self-intersecting");
    for (const Vec2& v : obs)
      require(point_in_polygon(v, scene.room), "obstacle vertex outside the room");
    scene.obstacles.push_back(to_ccw(obs));
  }

  for (const Vec3& t : config.trps) {
    Vec3 trp = t;
    if (std::isnan(trp.z())) trp.z() = config.trp_height;
    require(trp.z() > 0.0, "TRP height must be positive");
    require(point_in_polygon(trp.head<2>(), scene.room),
            "TRP position outside the room");
    scene.trps.push_back(trp);
  }
  return scene;
}

SceneConfig scene_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, std::string("scene config: ") + e.what());
  }
  SceneConfig cfg;
  try {
    for (const auto& v : j.at("room")) cfg.room.emplace_back(v.at(0), v.at(1));
    if (j.contains("obstacles")) {
      for (const auto& poly : j["obstacles"]) {
        Polygon obs;
        for (const auto& v : poly) obs.emplace_back(v.at(0), v.at(1));
        cfg.obstacles.push_back(std::move(obs));
      }
    }
    cfg.ue_height = j.value("ue_height", 1.5);
    cfg.trp_height = j.value("trp_height", 8.0);
    for (const auto& t : j.at("trps")) {
      const double z = t.size() >= 3 ? double(t.at(2)) : cfg.trp_height;
      cfg.trps.emplace_back(double(t.at(0)), double(t.at(1)), z);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::bad_format, std::string("scene config: ") + e.what());
  }
  return cfg;
}

std::string scene_config_to_json(const Scene& scene) {
  nlohmann::json j;
  for (const Vec2& v : scene.room) j["room"].push_back({v.x(), v.y()});
  j["obstacles"] = nlohmann::json::array();
  for (const Polygon& obs : scene.obstacles) {
    nlohmann::json p = nlohmann::json::array();
    for (const Vec2& v : obs) p.push_back({v.x(), v.y()});
    j["obstacles"].push_back(p);
  }
  for (const Vec3& t : scene.trps) j["trps"].push_back({t.x(), t.y(), t.z()});
  j["ue_height"] = scene.ue_height;
  j["trp_height"] = scene.trp_height;
  return j.dump(2);
}

namespace {

// Admissible step: end point in free space with some wall clearance kept so
// laser poses stay strictly interior.
constexpr double kWallMargin = 0.35;

bool step_ok(const Scene& scene, const Vec2& p) {
  return scene.in_free_space(p) && scene.clearance(p) >= kWallMargin;
}

}  // namespace

Trajectory generate_trajectory(const Scene& scene, std::size_t n_steps,
                               std::uint64_t seed, const Kinematics& kin) {
  require(n_steps >= 2, "trajectory needs at least 2 steps");
  require(kin.v_max > 0 && kin.omega_max > 0 && kin.dt > 0,
          "kinematic limits must be positive");

  Rng rng(derive_seed(seed, 0xA11CE));

  Vec2 lo, hi;
  scene.bounding_box(lo, hi);

  Vec2 pos;
  bool placed = false;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    pos = Vec2(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
    if (step_ok(scene, pos)) {
      placed = true;
      break;
    }
  }
  require(placed, "could not place a start pose: free space too small",
          ErrorCode::invalid_argument);

  double heading = rng.uniform(-M_PI, M_PI);
  double omega = 0.0;
  // OU parameters: correlation time 1.5 s, stationary std 0.8 rad/s.
  const double rho = std::exp(-kin.dt / 1.5);
  const double ou_sigma = 0.8 * std::sqrt(1.0 - rho * rho);
  const double max_turn = kin.omega_max * kin.dt;

  Trajectory traj;
  traj.dt = kin.dt;
  traj.positions.reserve(n_steps);
  traj.headings.reserve(n_steps);
  traj.positions.emplace_back(pos.x(), pos.y(), scene.ue_height);
  traj.headings.push_back(heading);

  for (std::size_t n = 1; n < n_steps; ++n) {
    omega = rho * omega + ou_sigma * rng.normal();
    omega = std::clamp(omega, -kin.omega_max, kin.omega_max);
    double turn = std::clamp(omega * kin.dt, -max_turn, max_turn);

    double try_heading = wrap_angle(heading + turn);
    double speed = kin.v_max;
    Vec2 next = pos + speed * kin.dt * Vec2(std::cos(try_heading), std::sin(try_heading));

    if (!step_ok(scene, next)) {
      // Blocked: steer at the turn limit toward whichever side clears, and
      // kill speed for this step if neither does.
      const double left = wrap_angle(heading + max_turn);
      const double right = wrap_angle(heading - max_turn);
      const Vec2 next_l = pos + speed * kin.dt * Vec2(std::cos(left), std::sin(left));
      const Vec2 next_r = pos + speed * kin.dt * Vec2(std::cos(right), std::sin(right));
      const bool ok_l = step_ok(scene, next_l);
      const bool ok_r = step_ok(scene, next_r);
      if (ok_l && ok_r) {
        const bool pick_left = rng.uniform() < 0.5;
        try_heading = pick_left ? left : right;
        next = pick_left ? next_l : next_r;
      } else if (ok_l || ok_r) {
        try_heading = ok_l ? left : right;
        next = ok_l ? next_l : next_r;
      } else {
        // Rotate in place toward the open half-space around the position.
        const Vec2 inward = -(pos - 0.5 * (lo + hi)).normalized();
        const double want = std::atan2(inward.y(), inward.x());
        const double delta = wrap_angle(want - heading);
        try_heading = wrap_angle(heading + std::clamp(delta, -max_turn, max_turn));
        next = pos;
      }
      omega = wrap_angle(try_heading - heading) / kin.dt;
    }

    heading = try_heading;
    pos = next;
    traj.positions.emplace_back(pos.x(), pos.y(), scene.ue_height);
    traj.headings.push_back(heading);
  }
  return traj;
}

LaserScan simulate_laser_scan(const Scene& scene, const Pose2D& pose,
                              const LaserConfig& cfg, std::uint64_t seed) {
  require(scene.in_free_space(pose.position), "laser pose outside free space");
  require(cfg.angular_resolution_rad > 0, "angular resolution must be positive");

  const auto polys = scene.solid_boundaries();
  const std::size_t k_count =
      static_cast<std::size_t>(std::ceil(2.0 * M_PI / cfg.angular_resolution_rad));

  Rng rng(derive_seed(seed, 0x1A5E7));
  LaserScan scan;
  scan.points.reserve(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double phi = static_cast<double>(k) * cfg.angular_resolution_rad;
    const double world = pose.heading + phi;
    const Vec2 dir(std::cos(world), std::sin(world));
    const auto hit = ray_cast(pose.position, dir, polys);
    double r = kLaserNoReturn;
    if (hit && *hit <= cfg.r_max) {
      r = *hit;
      if (cfg.noise_sigma > 0.0)
        r = std::clamp(r + rng.normal(0.0, cfg.noise_sigma), 1e-3, cfg.r_max);
    }
    scan.points.emplace_back(r, phi);
  }
  return scan;
}

}  // namespace chartloc
