#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blenderlab/interval.hpp"

namespace blender {

// Product box X x Y x Z with a one-dimensional central coordinate, an
// expanding block of dimension d_u and a strongly contracting block of
// dimension d_ss.
struct BoxXYZ {
  Interval x;
  std::vector<Interval> y;  // d_u coordinates
  std::vector<Interval> z;  // d_ss coordinates

  int du() const { return static_cast<int>(y.size()); }
  int dss() const { return static_cast<int>(z.size()); }

  double y_rad() const {
    double r = 0.0;
    for (const auto& c : y) r = std::max(r, c.rad());
    return r;
  }
  double z_rad() const {
    double r = 0.0;
    for (const auto& c : z) r = std::max(r, c.rad());
    return r;
  }
  bool contains(double px, const std::vector<double>& py,
                const std::vector<double>& pz, double tol = 0.0) const {
    if (px < x.lo - tol || px > x.hi + tol) return false;
    for (size_t j = 0; j < y.size(); ++j)
      if (py[j] < y[j].lo - tol || py[j] > y[j].hi + tol) return false;
    for (size_t j = 0; j < z.size(); ++j)
      if (pz[j] < z[j].lo - tol || pz[j] > z[j].hi + tol) return false;
    return true;
  }
};

struct Point3 {
  double x = 0.0;
  std::vector<double> y;
  std::vector<double> z;
};

// Opening constants of the three invariant cone families, max-norm on blocks:
//   u-cone:  |dx| + ||dz|| <= K_u ||dy||
//   s-cone:  ||dy||        <= K_s (|dx| + ||dz||)
//   ss-cone: |dx| + ||dy|| <= K_ss ||dz||
struct ConeConstants {
  double k_u = 0.0;
  double k_s = 0.0;
  double k_ss = 0.0;
};

struct Tangent {
  double dx = 0.0;
  std::vector<double> dy;
  std::vector<double> dz;
};

inline double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double c : v) m = std::max(m, std::fabs(c));
  return m;
}

// Signed slack of cone membership: >= 0 means inside (closed cones, boundary
// vectors are members).
inline double cone_slack_u(const Tangent& v, double k_u) {
  return k_u * max_norm(v.dy) - (std::fabs(v.dx) + max_norm(v.dz));
}
inline double cone_slack_s(const Tangent& v, double k_s) {
  return k_s * (std::fabs(v.dx) + max_norm(v.dz)) - max_norm(v.dy);
}
inline double cone_slack_ss(const Tangent& v, double k_ss) {
  return k_ss * max_norm(v.dz) - (std::fabs(v.dx) + max_norm(v.dy));
}

enum class ConeKind { U, S, SS };

inline bool in_cone(const Tangent& v, const ConeConstants& k, ConeKind which) {
  switch (which) {
    case ConeKind::U: return cone_slack_u(v, k.k_u) >= 0.0;
    case ConeKind::S: return cone_slack_s(v, k.k_s) >= 0.0;
    case ConeKind::SS: return cone_slack_ss(v, k.k_ss) >= 0.0;
  }
  return false;
}

// Strong-stable disc: the graph (x, y) = s(z) over the full z-box of its
// element.  Stored as an affine core around the z-box centre plus a padding
// radius; lip_x / lip_y are certified max-norm Lipschitz bounds dominating
// the affine slopes together with whatever the pad absorbs.
struct SsDisc {
  int element = 0;
  double x0 = 0.0;                            // core x at the z-box centre
  std::vector<double> x_slope;                // d_ss
  std::vector<double> y0;                     // d_u
  std::vector<std::vector<double>> y_slope;   // d_u rows, d_ss cols
  double pad = 0.0;
  double lip_x = 0.0;
  double lip_y = 0.0;

  double x_at(const std::vector<double>& z) const {
    double v = x0;
    for (size_t j = 0; j < x_slope.size(); ++j) v += x_slope[j] * z[j];
    return v;
  }
  std::vector<double> y_at(const std::vector<double>& z) const {
    std::vector<double> v = y0;
    for (size_t i = 0; i < v.size(); ++i)
      for (size_t j = 0; j < z.size(); ++j) v[i] += y_slope[i][j] * z[j];
    return v;
  }
};

// Unstable disc: the graph (x, z) = s(y) over the full y-box of its element.
struct UDisc {
  int element = 0;
  double x0 = 0.0;
  std::vector<double> x_slope;                // d_u
  std::vector<double> z0;                     // d_ss
  std::vector<std::vector<double>> z_slope;   // d_ss rows, d_u cols
  double pad = 0.0;
  double lip_x = 0.0;
  double lip_z = 0.0;
};

// Certified x-extent of a disc over its fibre box: core extent plus the
// Lipschitz sweep plus the pad, outward-rounded.
Interval x_projection(const SsDisc& d, const BoxXYZ& box);
Interval x_projection(const UDisc& d, const BoxXYZ& box);

// The disc crosses the element relative to the given base interval when its
// x-extent lies in the open interior; ties are failures.
bool crosses(const SsDisc& d, const BoxXYZ& box, const Interval& base);

// Two x-extents are separated when their gap strictly exceeds delta_ss.
bool separated(const Interval& a, const Interval& b, double delta_ss);

// Symbolic itinerary.  Strip codings are map ids (outermost first); array
// codings are slot choices inside an exact folding array.
enum class CodingKind { Strip, ArraySlot };
struct Coding {
  CodingKind kind = CodingKind::Strip;
  std::vector<int> symbols;
};

// Reference to an unstable leaf through a nested strip sequence.  When
// period > 0 the final `period` symbols repeat forever (a periodic tail).
struct LeafRef {
  int element = 0;
  std::vector<int> strips;  // map ids, outermost first
  int period = 0;
  Interval x_enclosure;
};

enum class FoldKind { PrefoldRight, PrefoldLeft, FoldRight, FoldLeft };

struct FoldMarker {
  double t = 0.0;
  LeafRef leaf;
};

// One-parameter family of ss-discs S_t, t in [0, 1].  The centre curve is
// quadratic in x and affine in y:
//   X(t) = x_c0 + x_c1 t + x_c2 t^2,   Y_j(t) = y_c0[j] + y_c1[j] t.
// Each fibre is an ss-disc with the shared slope template below.
struct FoldingFamily {
  int element = 0;
  double x_c0 = 0.0, x_c1 = 0.0, x_c2 = 0.0;
  std::vector<double> y_c0, y_c1;
  std::vector<double> x_slope;               // d_ss fibre slopes
  std::vector<std::vector<double>> y_slope;  // d_u x d_ss
  double pad = 0.0;
  double lip_x = 0.0;
  double lip_y = 0.0;
  FoldKind kind = FoldKind::PrefoldRight;
  std::vector<FoldMarker> markers;

  double x_center(double t) const { return x_c0 + t * (x_c1 + t * x_c2); }
  double dx_center(double t) const { return x_c1 + 2.0 * x_c2 * t; }
  std::vector<double> y_center(double t) const {
    std::vector<double> v = y_c0;
    for (size_t j = 0; j < v.size(); ++j) v[j] += y_c1[j] * t;
    return v;
  }
  SsDisc fiber(double t) const {
    SsDisc d;
    d.element = element;
    d.x0 = x_center(t);
    d.x_slope = x_slope;
    d.y0 = y_center(t);
    d.y_slope = y_slope;
    d.pad = pad;
    d.lip_x = lip_x;
    d.lip_y = lip_y;
    return d;
  }
  // Certified x-extent of the whole family over t in [a, b].
  Interval x_extent(const BoxXYZ& box, double a = 0.0, double b = 1.0) const;
  // Extremal parameter of the centre curve inside [a, b] (vertex clamped).
  double vertex(double a = 0.0, double b = 1.0) const;
};

// Fold detection against the u-cone: parameters where the transported centre
// curve leaves the u-cone, i.e. |X'(t)| <= k_u * ||Y'(t)|| has solutions.
// Returns the parameter minimising |X'(t)| over the feasible set in [0, 1]
// together with the membership slack there; nullopt when the curve stays
// transverse (no parameter satisfies the cone inequality).
struct FoldPoint {
  double t = 0.0;
  double slack = 0.0;  // k_u * ||Y'|| - |X'| at t, >= 0
};
std::optional<FoldPoint> detect_cu_tangent(const FoldingFamily& f, double k_u);

}  // namespace blender
