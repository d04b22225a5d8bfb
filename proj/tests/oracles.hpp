#pragma once

// Independent cross-checks for the test suite.  Everything here recomputes a
// result by a different route than the library: exact sweep-line coverage of
// interval unions, dense grid sampling of disc projections, central
// finite differences for derivatives, bisection for the implicit y-solve, and
// closed-form orbit series for coding words.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blenderlab/covering.hpp"
#include "blenderlab/crossmap.hpp"
#include "blenderlab/geometry.hpp"
#include "blenderlab/interval.hpp"

namespace oracle {

// --- randomness -----------------------------------------------------------

inline std::mt19937_64 seeded(std::uint64_t s) { return std::mt19937_64(s); }

inline double urand(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

// --- interval-union coverage (sweep line) ---------------------------------

// True iff the closed union of `ws` covers the closed interval `target`.
inline bool union_covers(std::vector<blender::Interval> ws,
                         const blender::Interval& target) {
  std::sort(ws.begin(), ws.end(),
            [](const blender::Interval& a, const blender::Interval& b) {
              return a.lo < b.lo;
            });
  double cur = target.lo;
  for (const auto& w : ws) {
    if (w.lo > cur) return false;
    cur = std::max(cur, w.hi);
    if (cur >= target.hi) return true;
  }
  return cur >= target.hi;
}

// Midpoint of the first maximal gap left open in `target`, if any.
inline std::optional<double> first_uncovered(std::vector<blender::Interval> ws,
                                             const blender::Interval& target) {
  std::sort(ws.begin(), ws.end(),
            [](const blender::Interval& a, const blender::Interval& b) {
              return a.lo < b.lo;
            });
  double cur = target.lo;
  for (const auto& w : ws) {
    if (cur >= target.hi) return std::nullopt;
    if (w.lo > cur) return 0.5 * (cur + std::min(w.lo, target.hi));
    cur = std::max(cur, w.hi);
  }
  if (cur < target.hi) return 0.5 * (cur + target.hi);
  return std::nullopt;
}

// --- disc sampling --------------------------------------------------------

// Range of x over a dense z-grid of the disc core, pad included.
inline void sample_disc_x(const blender::SsDisc& d, const blender::BoxXYZ& box,
                          int n, double* lo, double* hi) {
  const size_t dim = box.z.size();
  std::vector<int> idx(dim, 0);
  std::vector<double> z(dim, 0.0);
  *lo = 1e300;
  *hi = -1e300;
  for (;;) {
    for (size_t j = 0; j < dim; ++j) {
      const auto& zb = box.z[j];
      z[j] = n == 1 ? zb.mid() : zb.lo + (zb.hi - zb.lo) * idx[j] / (n - 1);
    }
    const double x = d.x_at(z);
    *lo = std::min(*lo, x - d.pad);
    *hi = std::max(*hi, x + d.pad);
    size_t j = 0;
    while (j < dim && ++idx[j] == n) idx[j++] = 0;
    if (j == dim) break;
  }
  if (dim == 0) {
    *lo = d.x0 - d.pad;
    *hi = d.x0 + d.pad;
  }
}

// --- explicit cross-form evaluation and finite differences ----------------

// One output of the cross relations: row 1 = centre, 2 = expanding (component
// k), 3 = strong stable (component k).
inline double cross_out(const blender::MapDef& m, int row, int k, double x,
                        const std::vector<double>& ybar,
                        const std::vector<double>& z) {
  const double psi = blender::psi_component(m, row, x, ybar, z);
  if (row == 1) return m.A * x + m.B + psi;
  if (row == 2) return m.c[static_cast<size_t>(k)] +
                       ybar[static_cast<size_t>(k)] / m.E[static_cast<size_t>(k)] +
                       psi;
  return m.zeta[static_cast<size_t>(k)] +
         m.C[static_cast<size_t>(k)] * z[static_cast<size_t>(k)] + psi;
}

// Central difference of cross_out with respect to input `wrt` (0 = x,
// 1 + i = ybar_i, 1 + du + j = z_j).
inline double fd_cross(const blender::MapDef& m, int row, int k, double x,
                       std::vector<double> ybar, std::vector<double> z,
                       size_t wrt, double h) {
  auto at = [&](double s) {
    double xx = x;
    std::vector<double> yy = ybar, zz = z;
    if (wrt == 0)
      xx += s;
    else if (wrt <= ybar.size())
      yy[wrt - 1] += s;
    else
      zz[wrt - 1 - ybar.size()] += s;
    return cross_out(m, row, k, xx, yy, zz);
  };
  return (at(h) - at(-h)) / (2.0 * h);
}

// Directional derivative of the ambient forward map by central differences on
// eval_forward.  Returns false if either evaluation fails.
inline bool fd_tangent(const blender::Model& mo, int id,
                       const blender::Point3& p, const blender::Tangent& v,
                       double h, blender::Tangent* out) {
  auto shift = [&](double s) {
    blender::Point3 q = p;
    q.x += s * v.dx;
    for (size_t i = 0; i < q.y.size(); ++i) q.y[i] += s * v.dy[i];
    for (size_t j = 0; j < q.z.size(); ++j) q.z[j] += s * v.dz[j];
    return q;
  };
  const auto& m = mo.map_by_id(id);
  auto a = blender::eval_forward(mo, id, shift(h), m.source);
  auto b = blender::eval_forward(mo, id, shift(-h), m.source);
  if (!a.ok() || !b.ok()) return false;
  out->dx = (a->x - b->x) / (2.0 * h);
  out->dy.resize(p.y.size());
  out->dz.resize(p.z.size());
  for (size_t i = 0; i < p.y.size(); ++i)
    out->dy[i] = (a->y[i] - b->y[i]) / (2.0 * h);
  for (size_t j = 0; j < p.z.size(); ++j)
    out->dz[j] = (a->z[j] - b->z[j]) / (2.0 * h);
  return true;
}

// --- implicit y-solve by bisection ----------------------------------------

// Solves c + ybar/E + psi2(x, ybar, z) = y_target for ybar in [lo, hi]
// (one expanding dimension).
inline std::optional<double> bisect_ybar(const blender::MapDef& m, double x,
                                         double y_target,
                                         const std::vector<double>& z,
                                         double lo, double hi) {
  auto f = [&](double yb) {
    std::vector<double> v{yb};
    return cross_out(m, 2, 0, x, v, z) - y_target;
  };
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// --- orbit series for coding words ----------------------------------------

// Centre fixed point of map `id`, perturbation included (fixed-point
// iteration; the centre contraction makes it converge).
inline double center_fixed_point(const blender::Model& mo, int id) {
  const auto& m = mo.map_by_id(id);
  std::vector<double> ymid, zmid;
  const auto& box = mo.elements[static_cast<size_t>(m.source)];
  for (const auto& yb : box.y) ymid.push_back(yb.mid());
  for (const auto& zb : box.z) zmid.push_back(zb.mid());
  double x = m.B / (1.0 - m.A);
  for (int it = 0; it < 400; ++it) {
    const double nx = cross_out(m, 1, 0, x, ymid, zmid);
    if (std::fabs(nx - x) < 1e-16) return nx;
    x = nx;
  }
  return x;
}

// Pointwise x of the orbit that follows `word` (outermost first) and then
// stays on the centre fixed point of `tail_id` forever.  For affine maps this
// is the exact geometric series; with perturbations the centre recursion is
// composed pointwise at the fibre midline.
inline double word_leaf_x(const blender::Model& mo, const std::vector<int>& word,
                          int tail_id) {
  double x = center_fixed_point(mo, tail_id);
  for (size_t i = word.size(); i-- > 0;) {
    const auto& m = mo.map_by_id(word[i]);
    std::vector<double> ymid, zmid;
    const auto& box = mo.elements[static_cast<size_t>(m.source)];
    for (const auto& yb : box.y) ymid.push_back(yb.mid());
    for (const auto& zb : box.z) zmid.push_back(zb.mid());
    x = cross_out(m, 1, 0, x, ymid, zmid);
  }
  return x;
}

// --- coded-box pairwise discipline ----------------------------------------

inline bool is_prefix(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() > b.size()) return false;
  return std::equal(a.begin(), a.end(), b.begin());
}

struct CodedBox {
  std::vector<int> prefix;
  blender::Interval w;
};

// Counts pairs violating the nesting discipline: comparable prefixes must
// nest (outer encloses inner), incomparable ones must be disjoint.  Records
// the smallest positive gap seen over incomparable pairs.
inline int pair_rule_violations(const std::vector<CodedBox>& boxes,
                                double* min_gap) {
  int bad = 0;
  if (min_gap) *min_gap = 1e300;
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = i + 1; j < boxes.size(); ++j) {
      const auto& a = boxes[i];
      const auto& b = boxes[j];
      if (is_prefix(a.prefix, b.prefix)) {
        if (!a.w.encloses(b.w)) ++bad;
      } else if (is_prefix(b.prefix, a.prefix)) {
        if (!b.w.encloses(a.w)) ++bad;
      } else {
        const double g = blender::gap(a.w, b.w);
        if (g <= 0.0) ++bad;
        else if (min_gap) *min_gap = std::min(*min_gap, g);
      }
    }
  }
  return bad;
}

// All words of length `len_lo`..`len_hi` over symbols 0..arity-1, shortest
// first.
inline std::vector<std::vector<int>> all_words(int arity, int len_lo,
                                               int len_hi) {
  std::vector<std::vector<int>> out;
  for (int len = len_lo; len <= len_hi; ++len) {
    std::vector<int> w(static_cast<size_t>(len), 0);
    for (;;) {
      out.push_back(w);
      int i = len - 1;
      while (i >= 0 && ++w[static_cast<size_t>(i)] == arity)
        w[static_cast<size_t>(i--)] = 0;
      if (i < 0) break;
    }
  }
  return out;
}

// --- frame resolution for coded windows -----------------------------------

// The slot array whose first map has the centre fixed point nearest zero;
// windows of coded boxes compose that array's maps slot for slot.
inline std::optional<size_t> frame_array(const blender::Model& mo) {
  std::optional<size_t> best;
  double best_d = 1e300;
  for (size_t a = 0; a < mo.arrays.size(); ++a) {
    if (mo.arrays[a].maps.empty()) continue;
    const auto& m = mo.map_by_id(mo.arrays[a].maps.front());
    const double d = std::fabs(m.B / (1.0 - m.A));
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

}  // namespace oracle
