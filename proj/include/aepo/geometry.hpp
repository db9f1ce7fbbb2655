#pragma once

#include <vector>

namespace aepo::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

// Edges count as inside.
bool point_in_bbox(const Point& p, const BBox& b);

Point bbox_center(const BBox& b);

double triangle_area(const Point& a, const Point& b, const Point& c);

// True when every triple of points is degenerate relative to the spread of
// the set: area / d^2 < eps_rel for all triples, where d is the largest
// pairwise distance. Fewer than three points are never collinear; a set of
// coincident points (d = 0) always is.
bool is_collinear_set(const std::vector<Point>& points, double eps_rel = 1e-3);

}  // namespace aepo::geometry
