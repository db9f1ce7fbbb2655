#include "aepo/geometry.hpp"

#include <cmath>

namespace aepo::geometry {

bool point_in_bbox(const Point& p, const BBox& b) {
  return p.x >= b.x_min && p.x <= b.x_max && p.y >= b.y_min && p.y <= b.y_max;
}

Point bbox_center(const BBox& b) {
  return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

double triangle_area(const Point& a, const Point& b, const Point& c) {
  const double cross =
      (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return std::abs(cross) / 2.0;
}

bool is_collinear_set(const std::vector<Point>& points, double eps_rel) {
  const std::size_t n = points.size();
  if (n < 3) return false;

  // Largest squared pairwise distance; avoids the sqrt since the threshold
  // compares area against eps_rel * d^2.
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = points[i].x - points[j].x;
      const double dy = points[i].y - points[j].y;
      d2 = std::max(d2, dx * dx + dy * dy);
    }
  }
  if (d2 == 0.0) return true;

  const double limit = eps_rel * d2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        if (triangle_area(points[i], points[j], points[k]) >= limit) {
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace aepo::geometry
