#include "blenderlab/geometry.hpp"

namespace blender {

Interval x_projection(const SsDisc& d, const BoxXYZ& box) {
  Interval core = Interval::point(d.x0);
  for (size_t j = 0; j < d.x_slope.size(); ++j) {
    const Interval cj = box.z[j] - box.z[j].mid();
    core = core + Interval::point(d.x_slope[j]) * cj;
  }
  // The affine core already sweeps the box; the pad absorbs non-affine
  // deviation, and any excess of lip_x over the affine row adds the rest.
  double slope_sum = 0.0;
  for (double s : d.x_slope) slope_sum += std::fabs(s);
  const double extra = std::max(0.0, d.lip_x - slope_sum) * box.z_rad();
  return inflate(core, d.pad + extra);
}

Interval x_projection(const UDisc& d, const BoxXYZ& box) {
  Interval core = Interval::point(d.x0);
  for (size_t j = 0; j < d.x_slope.size(); ++j) {
    const Interval cj = box.y[j] - box.y[j].mid();
    core = core + Interval::point(d.x_slope[j]) * cj;
  }
  double slope_sum = 0.0;
  for (double s : d.x_slope) slope_sum += std::fabs(s);
  const double extra = std::max(0.0, d.lip_x - slope_sum) * box.y_rad();
  return inflate(core, d.pad + extra);
}

bool crosses(const SsDisc& d, const BoxXYZ& box, const Interval& base) {
  return base.strictly_encloses(x_projection(d, box));
}

bool separated(const Interval& a, const Interval& b, double delta_ss) {
  return gap(a, b) > delta_ss;
}

Interval FoldingFamily::x_extent(const BoxXYZ& box, double a, double b) const {
  Interval core = hull(Interval::point(x_center(a)), Interval::point(x_center(b)));
  const double v = (x_c2 != 0.0) ? -x_c1 / (2.0 * x_c2) : a;
  if (v > a && v < b) core = hull(core, Interval::point(x_center(v)));
  double slope_sum = 0.0;
  for (double s : x_slope) slope_sum += std::fabs(s);
  const double lip = std::max(lip_x, slope_sum);
  return inflate(core, pad + lip * box.z_rad());
}

double FoldingFamily::vertex(double a, double b) const {
  if (x_c2 == 0.0) return 0.5 * (a + b);
  const double v = -x_c1 / (2.0 * x_c2);
  return std::min(std::max(v, a), b);
}

std::optional<FoldPoint> detect_cu_tangent(const FoldingFamily& f, double k_u) {
  const double yn = max_norm(f.y_c1);
  const double bound = k_u * yn;
  // X'(t) = x_c1 + 2 x_c2 t; the feasible set of |X'| <= bound is an interval.
  if (f.x_c2 == 0.0) {
    if (std::fabs(f.x_c1) > bound) return std::nullopt;
    return FoldPoint{0.5, bound - std::fabs(f.x_c1)};
  }
  const double v = -f.x_c1 / (2.0 * f.x_c2);
  const double half = bound / (2.0 * std::fabs(f.x_c2));
  const double lo = std::max(0.0, v - half), hi = std::min(1.0, v + half);
  if (lo > hi) return std::nullopt;
  const double t = std::min(std::max(v, lo), hi);
  return FoldPoint{t, bound - std::fabs(f.dx_center(t))};
}

}  // namespace blender
