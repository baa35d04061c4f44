#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rtls {

/// 3D point in meters. Shared by anchors, tags and solver outputs.
struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Position operator+(const Position& a, const Position& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

inline Position operator-(const Position& a, const Position& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}

inline Position operator*(double s, const Position& p) {
  return {s * p.x, s * p.y, s * p.z};
}

inline double dot(const Position& a, const Position& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Position& p) { return std::sqrt(dot(p, p)); }

inline double distance(const Position& a, const Position& b) {
  return norm(a - b);
}

inline Position centroid(const std::vector<Position>& pts) {
  if (pts.empty()) throw std::invalid_argument("centroid of empty set");
  Position c{};
  for (const auto& p : pts) c = c + p;
  return (1.0 / static_cast<double>(pts.size())) * c;
}

/// 2D wall segment used for line-of-sight tests (z is ignored).
struct Segment2D {
  double x1 = 0.0, y1 = 0.0;
  double x2 = 0.0, y2 = 0.0;
};

namespace detail {

inline double orient2d(double ax, double ay, double bx, double by, double cx,
                       double cy) {
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

inline bool on_segment(double ax, double ay, double bx, double by, double px,
                       double py) {
  return std::min(ax, bx) <= px && px <= std::max(ax, bx) &&
         std::min(ay, by) <= py && py <= std::max(ay, by);
}

}  // namespace detail

/// True when segments (a1,a2) and (b1,b2) intersect, endpoints included.
inline bool segments_intersect_2d(double a1x, double a1y, double a2x,
                                  double a2y, double b1x, double b1y,
                                  double b2x, double b2y) {
  using detail::on_segment;
  using detail::orient2d;
  const double d1 = orient2d(b1x, b1y, b2x, b2y, a1x, a1y);
  const double d2 = orient2d(b1x, b1y, b2x, b2y, a2x, a2y);
  const double d3 = orient2d(a1x, a1y, a2x, a2y, b1x, b1y);
  const double d4 = orient2d(a1x, a1y, a2x, a2y, b2x, b2y);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(b1x, b1y, b2x, b2y, a1x, a1y)) return true;
  if (d2 == 0 && on_segment(b1x, b1y, b2x, b2y, a2x, a2y)) return true;
  if (d3 == 0 && on_segment(a1x, a1y, a2x, a2y, b1x, b1y)) return true;
  if (d4 == 0 && on_segment(a1x, a1y, a2x, a2y, b2x, b2y)) return true;
  return false;
}

/// Wall blocks the 2D projection of the segment between two 3D points.
inline bool wall_blocks(const Segment2D& wall, const Position& a,
                        const Position& b) {
  return segments_intersect_2d(a.x, a.y, b.x, b.y, wall.x1, wall.y1, wall.x2,
                               wall.y2);
}

}  // namespace rtls
