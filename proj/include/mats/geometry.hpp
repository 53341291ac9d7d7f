#pragma once

#include <span>

namespace mats {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Rect {
  Point lo;
  Point hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double diagonal() const;

  // Closed containment.
  bool contains(const Point& p) const;
  // Open interior containment; boundary points are outside.
  bool interior_contains(const Point& p) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

double distance(const Point& a, const Point& b);

// Sign of the orientation determinant of (a, b, c): +1 counter-clockwise,
// -1 clockwise, 0 collinear. Evaluated exactly: a floating-point filter
// decides the easy cases, a rational fallback settles the rest.
int orientation(const Point& a, const Point& b, const Point& c);

// True iff the open segment (p, q) meets the open interior of `box`.
// Segments that only touch the boundary (sliding along an edge, grazing a
// corner) do not collide. All comparisons are exact.
bool segment_hits_rect(const Point& p, const Point& q, const Rect& box);

bool segment_collides(const Point& p, const Point& q,
                      std::span<const Rect> obstacles);

bool point_in_any_obstacle(const Point& p, std::span<const Rect> obstacles);

}  // namespace mats
