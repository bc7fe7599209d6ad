#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chartloc {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Proper or improper intersection of segments [p, p+r] and [q, q+s].
bool segments_intersect(const Vec2& p, const Vec2& p2, const Vec2& q, const Vec2& q2) {
  const Vec2 r = p2 - p;
  const Vec2 s = q2 - q;
  const double denom = cross2(r, s);
  const double qp_r = cross2(q - p, r);
  const double eps = 1e-12;
  if (std::abs(denom) < eps) {
    if (std::abs(qp_r) > eps) return false;  // parallel, not collinear
    // Collinear: overlap test on the dominant axis.
    const int ax = std::abs(r.x()) >= std::abs(r.y()) ? 0 : 1;
    double lo = std::min(p[ax], p2[ax]), hi = std::max(p[ax], p2[ax]);
    double qlo = std::min(q[ax], q2[ax]), qhi = std::max(q[ax], q2[ax]);
    return std::max(lo, qlo) <= std::min(hi, qhi) + eps;
  }
  const double t = cross2(q - p, s) / denom;
  const double u = qp_r / denom;
  return t >= -eps && t <= 1.0 + eps && u >= -eps && u <= 1.0 + eps;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double signed_area(const Polygon& poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    acc += cross2(a, b);
  }
  return 0.5 * acc;
}

bool polygon_is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[(i + 1) % n] - poly[i]).norm() < 1e-12) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (they share a vertex by construction).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        return false;
    }
  }
  return true;
}

bool point_in_polygon(const Vec2& p, const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  // Crossing-number test; points on the boundary are treated as outside via
  // the distance check below.
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& vi = poly[i];
    const Vec2& vj = poly[j];
    const bool straddles = (vi.y() > p.y()) != (vj.y() > p.y());
    if (straddles) {
      const double x_at = vj.x() + (vi.x() - vj.x()) * (p.y() - vj.y()) / (vi.y() - vj.y());
      if (p.x() < x_at) inside = !inside;
    }
  }
  if (!inside) return false;
  return distance_to_boundary(p, poly) > 0.0;
}

double distance_to_boundary(const Vec2& p, const Polygon& poly) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
  }
  return best;
}

std::optional<double> ray_segment_hit(const Vec2& origin, const Vec2& dir,
                                      const Vec2& a, const Vec2& b) {
  const Vec2 s = b - a;
  const double denom = cross2(dir, s);
  if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel to the edge
  const Vec2 d = a - origin;
  const double t = cross2(d, s) / denom;
  const double u = cross2(d, dir) / denom;
  if (t < 0.0 || u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
  return t;
}

std::optional<double> ray_cast(const Vec2& origin, const Vec2& unit_dir,
                               const std::vector<Polygon>& polys) {
  std::optional<double> best;
  for (const Polygon& poly : polys) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (auto t = ray_segment_hit(origin, unit_dir, poly[i], poly[(i + 1) % n])) {
        if (!best || *t < *best) best = *t;
      }
    }
  }
  return best;
}

Vec2 reflect_across_line(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = (b - a).normalized();
  const Vec2 ap = p - a;
  const Vec2 proj = a + d * ap.dot(d);
  return 2.0 * proj - p;
}

}  // namespace chartloc
