#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace chartloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

using Polygon = std::vector<Vec2>;  // closed, last edge wraps to first vertex

double signed_area(const Polygon& poly);

// True if no two non-adjacent edges intersect and no edge is degenerate.
bool polygon_is_simple(const Polygon& poly);

// Strictly-inside test (boundary counts as outside).
bool point_in_polygon(const Vec2& p, const Polygon& poly);

// Minimum distance from p to the polygon boundary.
double distance_to_boundary(const Vec2& p, const Polygon& poly);

// Nearest parameter t >= 0 with origin + t*dir on segment [a, b], if any.
// dir need not be normalized.
std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir,
                                      const Vec2& a, const Vec2& b);

// Distance along the unit direction to the nearest edge of any polygon in
// `polys`; nullopt if nothing is hit.
std::optional<double> ray_cast(const Vec2& origin, const Vec2& unit_dir,
                               const std::vector<Polygon>& polys);

// Mirror image of p across the infinite line through (a, b).
Vec2 reflect_across_line(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace chartloc
