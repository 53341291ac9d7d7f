#include "mats/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

namespace mats {

double Rect::diagonal() const { return std::hypot(width(), height()); }

bool Rect::contains(const Point& p) const {
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
}

bool Rect::interior_contains(const Point& p) const {
  return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
}

double distance(const Point& a, const Point& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

namespace {

using Rational = boost::multiprecision::cpp_rational;

Rational exact(double v) {
  // Doubles are dyadic rationals; the conversion is lossless.
  return Rational(v);
}

int exact_orientation(const Point& a, const Point& b, const Point& c) {
  const Rational det = (exact(b.x) - exact(a.x)) * (exact(c.y) - exact(a.y)) -
                       (exact(b.y) - exact(a.y)) * (exact(c.x) - exact(a.x));
  return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

}  // namespace

int orientation(const Point& a, const Point& b, const Point& c) {
  const double left = (b.x - a.x) * (c.y - a.y);
  const double right = (b.y - a.y) * (c.x - a.x);
  const double det = left - right;
  // Shewchuk's bound for the two-product orientation filter.
  constexpr double eps = std::numeric_limits<double>::epsilon() / 2;
  constexpr double bound = (3.0 + 16.0 * eps) * eps;
  const double err = bound * (std::abs(left) + std::abs(right));
  if (det > err) return 1;
  if (-det > err) return -1;
  return exact_orientation(a, b, c);
}

bool segment_hits_rect(const Point& p, const Point& q, const Rect& box) {
  // Bounding boxes must overlap with positive measure along both axes.
  if (std::max(p.x, q.x) <= box.lo.x || std::min(p.x, q.x) >= box.hi.x) return false;
  if (std::max(p.y, q.y) <= box.lo.y || std::min(p.y, q.y) >= box.hi.y) return false;
  if (p == q) return box.interior_contains(p);

  // The supporting line must separate the corners strictly; otherwise it at
  // most touches the boundary. Given that, any sub-segment whose extent
  // overlaps the open box on both axes crosses the open chord.
  const Point corners[4] = {
      box.lo, {box.hi.x, box.lo.y}, box.hi, {box.lo.x, box.hi.y}};
  bool pos = false;
  bool neg = false;
  for (const Point& c : corners) {
    const int o = orientation(p, q, c);
    pos |= o > 0;
    neg |= o < 0;
  }
  return pos && neg;
}

bool segment_collides(const Point& p, const Point& q,
                      std::span<const Rect> obstacles) {
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Rect& r) { return segment_hits_rect(p, q, r); });
}

bool point_in_any_obstacle(const Point& p, std::span<const Rect> obstacles) {
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Rect& r) { return r.interior_contains(p); });
}

}  // namespace mats
