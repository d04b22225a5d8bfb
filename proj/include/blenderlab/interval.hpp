#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace blender {

// Closed interval [lo, hi] with outward-rounded arithmetic.  Every compound
// operation widens each endpoint by one ulp, so a chain of operations yields
// an enclosure that is safe to feed into one-sided certificate checks: a
// strict inequality verified against the rounded enclosure holds for the
// exact quantity as well.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double l, double h) : lo(l), hi(h) { assert(l <= h); }

  static Interval point(double v) { return Interval(v, v); }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double rad() const { return 0.5 * (hi - lo); }
  // Largest absolute value attained on the interval.
  double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
  // Smallest absolute value attained on the interval (0 if it straddles 0).
  double mig() const {
    if (lo <= 0.0 && hi >= 0.0) return 0.0;
    return std::min(std::fabs(lo), std::fabs(hi));
  }

  bool contains(double v) const { return lo <= v && v <= hi; }
  bool strictly_contains(double v) const { return lo < v && v < hi; }
  bool encloses(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  // o lies in the open interior; ties count as failure.
  bool strictly_encloses(const Interval& o) const {
    return lo < o.lo && o.hi < hi;
  }
  bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
  bool straddles_zero() const { return lo <= 0.0 && hi >= 0.0; }
};

inline double next_up(double v) {
  return std::nextafter(v, std::numeric_limits<double>::infinity());
}
inline double next_down(double v) {
  return std::nextafter(v, -std::numeric_limits<double>::infinity());
}

// One-ulp outward widening; the rounding policy used after every arithmetic
// step below.
inline Interval outward(const Interval& a) {
  return Interval(next_down(a.lo), next_up(a.hi));
}

inline Interval operator+(const Interval& a, const Interval& b) {
  return outward(Interval(a.lo + b.lo, a.hi + b.hi));
}
inline Interval operator-(const Interval& a, const Interval& b) {
  return outward(Interval(a.lo - b.hi, a.hi - b.lo));
}
inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi;
  const double p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return outward(Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                          std::max(std::max(p1, p2), std::max(p3, p4))));
}

inline Interval operator*(double s, const Interval& a) {
  return Interval::point(s) * a;
}

inline Interval operator+(const Interval& a, double s) {
  return a + Interval::point(s);
}
inline Interval operator-(const Interval& a, double s) {
  return a - Interval::point(s);
}

// Division by an interval bounded away from zero; asserts the precondition.
inline Interval operator/(const Interval& a, const Interval& b) {
  assert(!b.straddles_zero());
  const double p1 = a.lo / b.lo, p2 = a.lo / b.hi;
  const double p3 = a.hi / b.lo, p4 = a.hi / b.hi;
  return outward(Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                          std::max(std::max(p1, p2), std::max(p3, p4))));
}

// a*x + b with outward rounding: the certified image of x under an affine map.
inline Interval affine_image(const Interval& x, double a, double b) {
  return Interval::point(a) * x + Interval::point(b);
}

inline Interval hull(const Interval& a, const Interval& b) {
  return Interval(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

// Intersection; empty results are reported through the flag.
inline bool intersect(const Interval& a, const Interval& b, Interval* out) {
  const double l = std::max(a.lo, b.lo), h = std::min(a.hi, b.hi);
  if (l > h) return false;
  *out = Interval(l, h);
  return true;
}

// Gap between two intervals: 0 if they touch or overlap.
inline double gap(const Interval& a, const Interval& b) {
  if (a.intersects(b)) return 0.0;
  return (a.hi < b.lo) ? b.lo - a.hi : a.lo - b.hi;
}

// Symmetric padding, outward-rounded.  pad must be >= 0.
inline Interval inflate(const Interval& a, double pad) {
  assert(pad >= 0.0);
  return outward(Interval(a.lo - pad, a.hi + pad));
}

// Symmetric shrinking; collapses to the midpoint when the interval is too
// narrow (callers treat that as an empty window).
inline bool shrink(const Interval& a, double margin, Interval* out) {
  const double l = a.lo + margin, h = a.hi - margin;
  if (l > h) return false;
  *out = Interval(l, h);
  return true;
}

}  // namespace blender
