#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "agrotrack/rng.hpp"

namespace agrotrack::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Simple polygon given as a CCW or CW vertex loop (not self-intersecting).
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw std::invalid_argument("polygon needs >= 3 vertices");
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  double area() const {
    double twice = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Vec2& a = vertices_[i];
      const Vec2& b = vertices_[(i + 1) % vertices_.size()];
      twice += cross(a, b);
    }
    return std::abs(twice) * 0.5;
  }

  Vec2 centroid() const {
    double twice = 0.0;
    Vec2 c{0.0, 0.0};
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Vec2& a = vertices_[i];
      const Vec2& b = vertices_[(i + 1) % vertices_.size()];
      const double w = cross(a, b);
      twice += w;
      c.x += (a.x + b.x) * w;
      c.y += (a.y + b.y) * w;
    }
    if (twice == 0.0) return vertices_.front();
    return {c.x / (3.0 * twice), c.y / (3.0 * twice)};
  }

  void bounds(Vec2& lo, Vec2& hi) const {
    lo = hi = vertices_.front();
    for (const Vec2& v : vertices_) {
      lo.x = std::min(lo.x, v.x);
      lo.y = std::min(lo.y, v.y);
      hi.x = std::max(hi.x, v.x);
      hi.y = std::max(hi.y, v.y);
    }
  }

  /// Point-in-polygon, boundary counts as inside.
  bool contains(const Vec2& p) const {
    bool inside = false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2& a = vertices_[j];
      const Vec2& b = vertices_[i];
      if (on_segment(a, b, p)) return true;
      if ((b.y > p.y) != (a.y > p.y)) {
        const double x_cross = (a.x - b.x) * (p.y - b.y) / (a.y - b.y) + b.x;
        if (p.x < x_cross) inside = !inside;
      }
    }
    return inside;
  }

  bool is_convex() const {
    const std::size_t n = vertices_.size();
    double sign = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e1 = vertices_[(i + 1) % n] - vertices_[i];
      const Vec2 e2 = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
      const double c = cross(e1, e2);
      if (c != 0.0) {
        if (sign == 0.0) {
          sign = c;
        } else if (sign * c < 0.0) {
          return false;
        }
      }
    }
    return true;
  }

  /// Uniform point strictly inside, by rejection sampling from the bbox.
  Vec2 sample_uniform(rng::Xoshiro256& gen) const {
    Vec2 lo, hi;
    bounds(lo, hi);
    for (int attempt = 0; attempt < 16384; ++attempt) {
      Vec2 p{gen.uniform(lo.x, hi.x), gen.uniform(lo.y, hi.y)};
      if (contains(p)) return p;
    }
    throw std::runtime_error("polygon sampling failed: degenerate polygon?");
  }

 private:
  static bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    const double c = cross(b - a, p - a);
    if (std::abs(c) > 1e-9 * (1.0 + std::abs(a.x) + std::abs(b.x))) return false;
    return p.x >= std::min(a.x, b.x) - 1e-12 && p.x <= std::max(a.x, b.x) + 1e-12 &&
           p.y >= std::min(a.y, b.y) - 1e-12 && p.y <= std::max(a.y, b.y) + 1e-12;
  }

  std::vector<Vec2> vertices_;
};

namespace detail {
inline int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  if (v > 1e-12) return 1;
  if (v < -1e-12) return -1;
  return 0;
}
}  // namespace detail

/// Proper or touching intersection of segments [p1,p2] and [q1,q2].
inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  using detail::orientation;
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  auto within = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return c.x >= std::min(a.x, b.x) - 1e-12 && c.x <= std::max(a.x, b.x) + 1e-12 &&
           c.y >= std::min(a.y, b.y) - 1e-12 && c.y <= std::max(a.y, b.y) + 1e-12;
  };
  if (o1 == 0 && within(p1, p2, q1)) return true;
  if (o2 == 0 && within(p1, p2, q2)) return true;
  if (o3 == 0 && within(q1, q2, p1)) return true;
  if (o4 == 0 && within(q1, q2, p2)) return true;
  return false;
}

/// A link is blocked when the sight line clips the polygon or either
/// endpoint sits inside it.
inline bool segment_blocked_by(const Polygon& poly, const Vec2& a, const Vec2& b) {
  if (poly.contains(a) || poly.contains(b)) return true;
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (segments_intersect(a, b, v[i], v[(i + 1) % v.size()])) return true;
  }
  return false;
}

}  // namespace agrotrack::geom
