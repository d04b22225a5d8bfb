#include "blenderlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blender {
namespace {

constexpr double kSolveTol = 1e-15;

// Conservative argument boxes for psi enclosures along a composition.
struct PsiEnv {
  Interval y1{0, 0};
  Interval z1{0, 0};
  bool any = false;
};

PsiEnv make_psi_env(const Model& model) {
  PsiEnv env;
  auto yh = model.ybar_hull();
  if (!yh.empty()) env.y1 = yh[0];
  bool first = true;
  for (const auto& e : model.elements) {
    if (e.z.empty()) continue;
    env.z1 = first ? e.z[0] : hull(env.z1, e.z[0]);
    first = false;
  }
  for (const auto& m : model.maps)
    if (!m.psi.empty()) env.any = true;
  return env;
}

// Certified range of the component-`comp` psi package over an x-box.
Interval psi_hull(const MapDef& m, int comp, const Interval& xbox,
                  const PsiEnv& env) {
  Interval total(0, 0);
  for (const auto& t : m.psi) {
    if (t.component != comp) continue;
    total = total + psi_bounds(t, xbox, env.y1, env.z1).value;
  }
  return total;
}

// Sup of |d psi_comp / d x| over the element boxes.
double psi_dx_sup(const MapDef& m, int comp, const Interval& xbox,
                  const PsiEnv& env) {
  double s = 0.0;
  for (const auto& t : m.psi) {
    if (t.component != comp) continue;
    s += psi_bounds(t, xbox, env.y1, env.z1).d_x.mag();
  }
  return s;
}

double psi_sup(const MapDef& m, int comp, const Interval& xbox,
               const PsiEnv& env) {
  return psi_hull(m, comp, xbox, env).mag();
}

// Forward x-enclosure of a word (outermost first) applied to a deep seed.
Interval forward_compose(const Model& model, const std::vector<int>& word,
                         Interval seed, const PsiEnv& env) {
  for (size_t i = word.size(); i-- > 0;) {
    const MapDef& m = model.map_by_id(word[i]);
    Interval img = affine_image(seed, m.A, m.B);
    if (!m.psi.empty()) img = img + psi_hull(m, 1, seed, env);
    seed = outward(img);
  }
  return seed;
}

// Per-level enclosures along a word: x_suffix[k] encloses the x-coordinate
// of the k-th backward orbit point (0 = outermost, n = deepest) and z_outer
// encloses the leaf's z-section in the outermost chart.
struct ChainBoxes {
  std::vector<Interval> x_suffix;
  std::vector<std::vector<Interval>> z_level;  // per level, per coordinate
};

ChainBoxes chain_boxes(const Model& model, const std::vector<int>& word,
                       int deep_element, const PsiEnv& env) {
  const size_t n = word.size();
  ChainBoxes cb;
  cb.x_suffix.assign(n + 1, Interval(0, 0));
  cb.z_level.assign(n + 1, {});
  cb.x_suffix[n] = model.elements[deep_element].x;
  cb.z_level[n] = model.elements[deep_element].z;
  for (size_t k = n; k-- > 0;) {
    const MapDef& m = model.map_by_id(word[k]);
    Interval img = affine_image(cb.x_suffix[k + 1], m.A, m.B);
    if (!m.psi.empty()) img = img + psi_hull(m, 1, cb.x_suffix[k + 1], env);
    cb.x_suffix[k] = outward(img);
    std::vector<Interval> z(cb.z_level[k + 1].size());
    for (size_t j = 0; j < z.size(); ++j) {
      z[j] = outward(affine_image(cb.z_level[k + 1][j], m.C[j], m.zeta[j]));
      if (j == 0 && !m.psi.empty())
        z[j] = outward(z[j] + psi_hull(m, 3, cb.x_suffix[k + 1], env));
    }
    cb.z_level[k] = std::move(z);
  }
  return cb;
}

// Solves A x + B + psi1(x, ybar, z) = target by the Newton iteration; the
// derivative is bounded away from zero for every admissible perturbation.
Expected<double> solve_center_back(const MapDef& m, double target,
                                   const std::vector<double>& ybar,
                                   const std::vector<double>& z, double x0) {
  double x = x0;
  for (int it = 0; it < 80; ++it) {
    double f = m.A * x + m.B + psi_component(m, 1, x, ybar, z) - target;
    if (std::fabs(f) <= kSolveTol * (1.0 + std::fabs(target))) return x;
    double h = 1e-7;
    double fp = (m.A * (x + h) + psi_component(m, 1, x + h, ybar, z) -
                 (m.A * (x - h) + psi_component(m, 1, x - h, ybar, z))) /
                (2 * h);
    if (std::fabs(fp) < 1e-12)
      return Error{"NO_CONVERGE", "degenerate centre derivative"};
    x -= f / fp;
  }
  return Error{"NO_CONVERGE", "backward centre solve stalled"};
}

// Backward orbit of a disc point along a word, assembled coordinate-wise so
// that only the centre direction is computed against the expansion: z runs
// forward from the deep anchor (contracting), y runs forward in depth
// (contracting), x runs backward from the disc.  Consecutive points are
// forward-consistent to solver tolerance.
struct OrbitOut {
  Point3 p0;
  std::vector<Point3> points;
};

Expected<OrbitOut> assemble_orbit(const Model& model,
                                  const std::vector<int>& word,
                                  const SsDisc& disc, int deep_element,
                                  const ChainBoxes& cb) {
  const size_t n = word.size();
  std::vector<double> xs(n + 1, 0.0);
  std::vector<std::vector<double>> zs(n + 1), ys(n + 1);
  // Initial guesses: suffix-window midpoints, box-centre fibres.
  for (size_t k = 0; k <= n; ++k) {
    xs[k] = cb.x_suffix[k].mid();
    zs[k].resize(cb.z_level[k].size());
    for (size_t j = 0; j < zs[k].size(); ++j) zs[k][j] = cb.z_level[k][j].mid();
  }
  {
    std::vector<double> zc(model.elements[deep_element].z.size());
    for (size_t j = 0; j < zc.size(); ++j)
      zc[j] = model.elements[deep_element].z[j].mid();
    zs[n] = zc;
  }
  ys[0] = disc.y_at(zs[0]);
  for (size_t k = 0; k < n; ++k) ys[k + 1] = ys[k];  // placeholder

  const int sweeps = 4;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // z forward from the deep anchor.
    for (size_t k = n; k-- > 0;) {
      const MapDef& m = model.map_by_id(word[k]);
      std::vector<double> z(zs[k + 1].size());
      for (size_t j = 0; j < z.size(); ++j)
        z[j] = m.zeta[j] + m.C[j] * zs[k + 1][j];
      if (!m.psi.empty() && !z.empty())
        z[0] += psi_component(m, 3, xs[k + 1], ys[k + 1], zs[k + 1]);
      zs[k] = std::move(z);
    }
    // x backward from the disc.
    xs[0] = disc.x_at(zs[0]);
    for (size_t k = 0; k < n; ++k) {
      const MapDef& m = model.map_by_id(word[k]);
      auto r = solve_center_back(m, xs[k], ys[k], zs[k + 1], xs[k + 1]);
      if (!r.ok()) return r.error();
      xs[k + 1] = *r;
    }
    // y forward in depth.
    ys[0] = disc.y_at(zs[0]);
    for (size_t k = 0; k < n; ++k) {
      const MapDef& m = model.map_by_id(word[k]);
      std::vector<double> y(ys[k].size());
      for (size_t i = 0; i < y.size(); ++i) y[i] = m.c[i] + ys[k][i] / m.E[i];
      if (!m.psi.empty() && !y.empty())
        y[0] += psi_component(m, 2, xs[k + 1], ys[k], zs[k + 1]);
      ys[k + 1] = std::move(y);
    }
    if (!make_psi_env(model).any) break;  // affine chains converge in one pass
  }

  OrbitOut out;
  out.points.resize(n + 1);
  for (size_t k = 0; k <= n; ++k)
    out.points[k] = Point3{xs[k], ys[k], zs[k]};
  out.p0 = out.points[0];
  return out;
}

// x-extent of a disc over a restricted z-box.
Interval disc_x_over(const SsDisc& d, const std::vector<Interval>& z) {
  Interval v = Interval::point(d.x0);
  for (size_t j = 0; j < d.x_slope.size() && j < z.size(); ++j)
    v = v + d.x_slope[j] * z[j];
  return outward(inflate(v, d.pad));
}

const StripWindow* window_of(const CoverContext& cx, int map_id) {
  int idx = cx.model->map_index(map_id);
  if (idx < 0 || idx >= static_cast<int>(cx.windows.size())) return nullptr;
  return &cx.windows[idx];
}

// Copies the engine trace to an optional caller sink on every exit path, so
// failed runs still leave their rows behind.
struct TraceMirror {
  std::vector<TraceRow>* dst;
  const std::vector<TraceRow>* src;
  ~TraceMirror() {
    if (dst) *dst = *src;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

// --- intersection engine ---------------------------------------------------

Expected<IntersectionResult> find_unstable_intersection(
    const CoverContext& cx, const SsDisc& disc, double tol, int max_depth,
    WindowMode mode, int forced_first, std::vector<TraceRow>* trace_out) {
  const Model& model = *cx.model;
  if (disc.element < 0 || disc.element >= static_cast<int>(model.elements.size()))
    return Error{"INVARIANT_BREACH", "disc element out of range"};
  PsiEnv env = make_psi_env(model);

  std::vector<int> word;
  std::vector<TraceRow> trace;
  TraceMirror mirror{trace_out, &trace};
  int deep_element = disc.element;
  Interval running = model.elements[disc.element].x;  // running intersection
  Interval cyl = running;

  {
    TraceRow r;
    r.step = 0;
    r.element = disc.element;
    r.strip = 0;
    r.x = x_projection(disc, model.elements[disc.element]);
    r.kind = "start";
    trace.push_back(r);
  }

  for (int depth = 0; depth <= max_depth; ++depth) {
    ChainBoxes cb = chain_boxes(model, word, deep_element, env);
    Interval xq = disc_x_over(disc, cb.z_level[0]);

    if (!word.empty()) {
      cyl = forward_compose(model, word,
                            Interval(-model.bcg.x_B, model.bcg.x_B), env);
      Interval meet;
      if (!intersect(running, cyl, &meet))
        return Error{"INVARIANT_BREACH",
                     "refined enclosure left the running intersection"};
      running = meet;
      TraceRow r;
      r.step = depth;
      r.element = deep_element;
      r.strip = word.back();
      r.x = cyl;
      r.kind = "strip";
      trace.push_back(r);
      if (cyl.width() <= tol) {
        auto orb = assemble_orbit(model, word, disc, deep_element, cb);
        if (!orb.ok()) return orb.error();
        for (size_t k = 0; k < orb->points.size(); ++k) {
          int e = (k == 0) ? disc.element
                           : model.map_by_id(word[k - 1]).source;
          const Point3& p = orb->points[k];
          if (!model.elements[e].contains(p.x, p.y, p.z, 1e-7))
            return Error{"INVARIANT_BREACH",
                         "backward orbit left the partition at step " +
                             std::to_string(k)};
        }
        IntersectionResult res;
        res.point = orb->p0;
        res.coding = Coding{CodingKind::Strip, word};
        res.depth = static_cast<int>(word.size());
        res.x_enclosure = running;
        res.residual = running.width();
        res.z_enclosure = cb.z_level[0];
        res.orbit = orb->points;
        res.trace = trace;
        return res;
      }
    }
    if (depth == max_depth) break;

    // Candidate strips: composed windows strictly containing the disc's
    // x-extent over the leaf's z-section.
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& m : model.maps) {
      if (!m.evaluable()) continue;
      if (forced_first > 0 && depth == 0 && m.id != forced_first) continue;
      const StripWindow* w = window_of(cx, m.id);
      if (!w) continue;
      if (mode == WindowMode::Center && !w->has_center) continue;
      Interval seed = (mode == WindowMode::Base) ? w->base : w->center;
      Interval composed = forward_compose(model, word, seed, env);
      if (!composed.strictly_encloses(xq)) continue;
      double dist = std::fabs(composed.mid() - xq.mid());
      if (dist < best_dist - 1e-18 ||
          (std::fabs(dist - best_dist) <= 1e-18 && best != 0 && m.id < best)) {
        best = m.id;
        best_dist = dist;
      }
    }
    if (best == 0) {
      if (forced_first > 0 && depth == 0)
        return Error{"NOT_CROSSING",
                     "forced first strip does not contain the disc extent"};
      return Error{"STUCK", "no window contains the disc extent at depth " +
                                std::to_string(depth) + " (extent [" +
                                fmt(xq.lo) + ", " + fmt(xq.hi) + "])"};
    }
    word.push_back(best);
    deep_element = model.map_by_id(best).source;
  }
  return Error{"MAX_DEPTH", "enclosure width " + fmt(running.width()) +
                                " above tolerance after " +
                                std::to_string(max_depth) + " steps"};
}

// --- disc preimage ---------------------------------------------------------

Expected<SsDisc> preimage_disc(const CoverContext& cx, int map_id,
                               const SsDisc& disc) {
  const Model& model = *cx.model;
  const StripWindow* w = window_of(cx, map_id);
  if (!w) return Error{"INVARIANT_BREACH", "unknown strip id"};
  const MapDef& m = model.map_by_id(map_id);
  if (!m.evaluable()) return Error{"OPAQUE", "bounds-only strip"};
  const BoxXYZ& ibox = model.elements[disc.element];
  if (!crosses(disc, ibox, w->base))
    return Error{"NOT_CROSSING", "disc extent misses the base window of strip " +
                                     std::to_string(map_id)};
  const BoxXYZ& sbox = model.elements[m.source];
  PsiEnv env = make_psi_env(model);

  std::vector<double> z0(sbox.z.size());
  for (size_t j = 0; j < z0.size(); ++j) z0[j] = sbox.z[j].mid();

  // Core solve at the source z-centre: coupled (x, zbar, ybar) Picard.
  std::vector<double> zbar(z0.size());
  for (size_t j = 0; j < zbar.size(); ++j) zbar[j] = m.zeta[j] + m.C[j] * z0[j];
  double x = (disc.x0 - m.B) / m.A;
  std::vector<double> ybar = disc.y_at(zbar);
  bool converged = m.psi.empty();
  for (int it = 0; it < 200 && !converged; ++it) {
    std::vector<double> zb(zbar.size());
    for (size_t j = 0; j < zb.size(); ++j) zb[j] = m.zeta[j] + m.C[j] * z0[j];
    if (!zb.empty()) zb[0] += psi_component(m, 3, x, ybar, z0);
    std::vector<double> yb = disc.y_at(zb);
    auto xs = solve_center_back(m, disc.x_at(zb), yb, z0, x);
    if (!xs.ok()) return xs.error();
    double dx = std::fabs(*xs - x);
    double dz = 0.0;
    for (size_t j = 0; j < zb.size(); ++j)
      dz = std::max(dz, std::fabs(zb[j] - zbar[j]));
    x = *xs;
    zbar = std::move(zb);
    ybar = std::move(yb);
    if (dx + dz <= kSolveTol) converged = true;
  }
  if (!converged && !m.psi.empty())
    return Error{"NO_CONVERGE", "coupled core solve stalled"};
  if (m.psi.empty()) {
    zbar.assign(z0.size(), 0.0);
    for (size_t j = 0; j < zbar.size(); ++j)
      zbar[j] = m.zeta[j] + m.C[j] * z0[j];
    ybar = disc.y_at(zbar);
    x = (disc.x_at(zbar) - m.B) / m.A;
  }

  const double amig = std::fabs(m.A);
  const Interval xsrc = model.elements[m.source].x;
  const double da1 = m.psi.empty() ? 0.0 : psi_dx_sup(m, 1, xsrc, env);
  const double a3 = m.psi.empty() ? 0.0 : psi_sup(m, 3, xsrc, env);
  const double a2 = m.psi.empty() ? 0.0 : psi_sup(m, 2, xsrc, env);
  if (amig <= da1)
    return Error{"NO_CONVERGE", "perturbation overwhelms the centre rate"};

  SsDisc out;
  out.element = m.source;
  out.x0 = x;
  out.x_slope.resize(z0.size());
  for (size_t j = 0; j < z0.size(); ++j) {
    double s = (j < disc.x_slope.size()) ? disc.x_slope[j] : 0.0;
    out.x_slope[j] = s * m.C[j] / m.A;
  }
  out.y0.resize(disc.y0.size());
  for (size_t i = 0; i < out.y0.size(); ++i) out.y0[i] = m.c[i] + ybar[i] / m.E[i];
  if (!m.psi.empty() && !out.y0.empty())
    out.y0[0] += psi_component(m, 2, x, ybar, z0);
  out.y_slope.assign(disc.y0.size(), std::vector<double>(z0.size(), 0.0));
  for (size_t i = 0; i < out.y_slope.size(); ++i)
    for (size_t j = 0; j < z0.size(); ++j) {
      double s = (i < disc.y_slope.size() && j < disc.y_slope[i].size())
                     ? disc.y_slope[i][j]
                     : 0.0;
      out.y_slope[i][j] = s * m.C[j] / m.E[i];
    }
  double c_hi = 0.0;
  for (double cj : m.C) c_hi = std::max(c_hi, std::fabs(cj));
  double e_mig = std::numeric_limits<double>::infinity();
  for (double ei : m.E) e_mig = std::min(e_mig, std::fabs(ei));
  out.pad = (disc.pad + 2.0 * a3 * disc.lip_x) / (amig - da1) +
            16.0 * std::numeric_limits<double>::epsilon();
  out.lip_x = (disc.lip_x * c_hi + 2.0 * a3) / (amig - da1);
  out.lip_y = (disc.lip_y * c_hi + 2.0 * a2) / e_mig +
              (m.psi.empty() ? 0.0 : psi_c1_norm(model, m, 2) * (out.lip_x + 1.0));
  double slope_sum = 0.0;
  for (double s : out.x_slope) slope_sum += std::fabs(s);
  out.lip_x = std::max(out.lip_x, slope_sum);

  if (out.lip_x > cx.cones.k.k_ss * (1.0 + 1e-9))
    return Error{"INVARIANT_BREACH",
                 "preimage Lipschitz bound " + fmt(out.lip_x) +
                     " leaves the strong-stable class (cap " +
                     fmt(cx.cones.k.k_ss) + ")"};
  return out;
}

// --- folding-family transport ---------------------------------------------

namespace {

// Restriction of a family to [a, b], renormalized to [0, 1].  Markers are
// remapped; those leaving the parameter range are dropped.
FoldingFamily restrict_family(const FoldingFamily& f, double a, double b) {
  FoldingFamily g = f;
  double dt = b - a;
  g.x_c0 = f.x_center(a);
  g.x_c1 = (f.x_c1 + 2.0 * f.x_c2 * a) * dt;
  g.x_c2 = f.x_c2 * dt * dt;
  g.y_c0 = f.y_center(a);
  g.y_c1 = f.y_c1;
  for (auto& v : g.y_c1) v *= dt;
  g.markers.clear();
  for (const auto& mk : f.markers) {
    double t = (mk.t - a) / dt;
    if (t < -1e-9 || t > 1.0 + 1e-9) continue;
    FoldMarker nm = mk;
    nm.t = std::min(1.0, std::max(0.0, t));
    g.markers.push_back(nm);
  }
  return g;
}

// Least-squares quadratic fit on a uniform grid; returns max residual.
double fit_quadratic(const std::vector<double>& ts,
                     const std::vector<double>& vs, double* c0, double* c1,
                     double* c2) {
  const size_t n = ts.size();
  double s0 = static_cast<double>(n), s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double b0 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < n; ++i) {
    double t = ts[i], t2 = t * t;
    s1 += t;
    s2 += t2;
    s3 += t2 * t;
    s4 += t2 * t2;
    b0 += vs[i];
    b1 += vs[i] * t;
    b2 += vs[i] * t2;
  }
  // Solve the 3x3 normal system by Cramer's rule.
  double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) +
               s2 * (s1 * s3 - s2 * s2);
  if (std::fabs(det) < 1e-30) {
    *c0 = vs.empty() ? 0.0 : vs[0];
    *c1 = *c2 = 0.0;
  } else {
    *c0 = (b0 * (s2 * s4 - s3 * s3) - s1 * (b1 * s4 - b2 * s3) +
           s2 * (b1 * s3 - b2 * s2)) /
          det;
    *c1 = (s0 * (b1 * s4 - b2 * s3) - b0 * (s1 * s4 - s2 * s3) +
           s2 * (s1 * b2 - s2 * b1)) /
          det;
    *c2 = (s0 * (s2 * b2 - s3 * b1) - s1 * (s1 * b2 - s3 * b0) +
           s2 * (s1 * b1 - s2 * b0)) /
          det;
  }
  double r = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double fitv = *c0 + ts[i] * (*c1 + ts[i] * *c2);
    r = std::max(r, std::fabs(vs[i] - fitv));
  }
  return r;
}

// Pulls a whole family backward through one strip.  Pure affine maps use the
// exact coefficient transform; perturbed maps refit the centre curve over a
// 33-point grid, absorbing the residual into the pad.
Expected<FoldingFamily> pull_family(const CoverContext& cx,
                                    const FoldingFamily& f, const MapDef& m,
                                    const PsiEnv& env) {
  const Model& model = *cx.model;
  const BoxXYZ& sbox = model.elements[m.source];
  FoldingFamily g;
  g.element = m.source;
  const double amig = std::fabs(m.A);
  const Interval xsrc = sbox.x;
  const double da1 = m.psi.empty() ? 0.0 : psi_dx_sup(m, 1, xsrc, env);
  const double a3 = m.psi.empty() ? 0.0 : psi_sup(m, 3, xsrc, env);
  const double a2 = m.psi.empty() ? 0.0 : psi_sup(m, 2, xsrc, env);
  if (amig <= da1)
    return Error{"NO_CONVERGE", "perturbation overwhelms the centre rate"};

  double refit_pad = 0.0;
  std::vector<double> z0(sbox.z.size());
  for (size_t j = 0; j < z0.size(); ++j) z0[j] = sbox.z[j].mid();

  if (m.psi.empty()) {
    g.x_c0 = (f.x_c0 - m.B) / m.A;
    g.x_c1 = f.x_c1 / m.A;
    g.x_c2 = f.x_c2 / m.A;
    g.y_c0.resize(f.y_c0.size());
    g.y_c1.resize(f.y_c1.size());
    for (size_t i = 0; i < f.y_c0.size(); ++i) {
      g.y_c0[i] = m.c[i] + f.y_c0[i] / m.E[i];
      g.y_c1[i] = f.y_c1[i] / m.E[i];
    }
  } else {
    const int kSamples = 33;
    std::vector<double> ts(kSamples), xv(kSamples);
    std::vector<std::vector<double>> yv(f.y_c0.size(),
                                        std::vector<double>(kSamples));
    double xprev = (f.x_c0 - m.B) / m.A;
    for (int i = 0; i < kSamples; ++i) {
      double t = static_cast<double>(i) / (kSamples - 1);
      ts[i] = t;
      std::vector<double> ybar = f.y_center(t);
      auto xs = solve_center_back(m, f.x_center(t), ybar, z0, xprev);
      if (!xs.ok()) return xs.error();
      xv[i] = *xs;
      xprev = *xs;
      for (size_t r = 0; r < yv.size(); ++r) {
        yv[r][i] = m.c[r] + ybar[r] / m.E[r];
        if (r == 0) yv[r][i] += psi_component(m, 2, *xs, ybar, z0);
      }
    }
    refit_pad += fit_quadratic(ts, xv, &g.x_c0, &g.x_c1, &g.x_c2);
    g.y_c0.resize(yv.size());
    g.y_c1.resize(yv.size());
    for (size_t r = 0; r < yv.size(); ++r) {
      g.y_c0[r] = yv[r][0];
      g.y_c1[r] = yv[r][kSamples - 1] - yv[r][0];
      double res = 0.0;
      for (int i = 0; i < kSamples; ++i)
        res = std::max(res, std::fabs(yv[r][i] - (g.y_c0[r] + g.y_c1[r] * ts[i])));
      refit_pad += res;
    }
  }

  g.x_slope.resize(sbox.z.size());
  for (size_t j = 0; j < g.x_slope.size(); ++j) {
    double s = (j < f.x_slope.size()) ? f.x_slope[j] : 0.0;
    g.x_slope[j] = s * m.C[j] / m.A;
  }
  g.y_slope.assign(f.y_c0.size(), std::vector<double>(sbox.z.size(), 0.0));
  for (size_t i = 0; i < g.y_slope.size(); ++i)
    for (size_t j = 0; j < g.y_slope[i].size(); ++j) {
      double s = (i < f.y_slope.size() && j < f.y_slope[i].size())
                     ? f.y_slope[i][j]
                     : 0.0;
      g.y_slope[i][j] = s * m.C[j] / m.E[i];
    }
  double c_hi = 0.0;
  for (double cj : m.C) c_hi = std::max(c_hi, std::fabs(cj));
  double e_mig = std::numeric_limits<double>::infinity();
  for (double ei : m.E) e_mig = std::min(e_mig, std::fabs(ei));
  g.pad = (f.pad + 2.0 * a3 * f.lip_x) / (amig - da1) + refit_pad +
          16.0 * std::numeric_limits<double>::epsilon();
  g.lip_x = (f.lip_x * c_hi + 2.0 * a3) / (amig - da1);
  double ssum = 0.0;
  for (double s : g.x_slope) ssum += std::fabs(s);
  g.lip_x = std::max(g.lip_x, ssum);
  g.lip_y = (f.lip_y * c_hi + 2.0 * a2) / e_mig;

  // Orientation-reversing centre branches exchange the left/right labels.
  bool flipped = m.A < 0.0;
  switch (f.kind) {
    case FoldKind::FoldRight:
      g.kind = flipped ? FoldKind::FoldLeft : FoldKind::FoldRight;
      break;
    case FoldKind::FoldLeft:
      g.kind = flipped ? FoldKind::FoldRight : FoldKind::FoldLeft;
      break;
    case FoldKind::PrefoldRight:
      g.kind = flipped ? FoldKind::PrefoldLeft : FoldKind::PrefoldRight;
      break;
    case FoldKind::PrefoldLeft:
      g.kind = flipped ? FoldKind::PrefoldRight : FoldKind::PrefoldLeft;
      break;
  }

  g.markers.reserve(f.markers.size());
  double psi1_abs = m.psi.empty() ? 0.0 : psi_sup(m, 1, xsrc, env);
  for (const auto& mk : f.markers) {
    FoldMarker nm = mk;
    nm.leaf.strips.insert(nm.leaf.strips.begin(), m.id);
    Interval e = mk.leaf.x_enclosure;
    double lo = (e.lo - m.B) / m.A, hi = (e.hi - m.B) / m.A;
    if (lo > hi) std::swap(lo, hi);
    nm.leaf.x_enclosure =
        outward(inflate(Interval(lo, hi), psi1_abs / (amig - da1)));
    nm.leaf.element = m.source;
    g.markers.push_back(nm);
  }
  if (g.lip_x > cx.cones.k.k_ss * (1.0 + 1e-9))
    return Error{"INVARIANT_BREACH",
                 "family Lipschitz bound left the strong-stable class"};
  return g;
}

double fibre_radius(const FoldingFamily& f, const BoxXYZ& box) {
  double sweep = 0.0;
  for (size_t j = 0; j < f.x_slope.size() && j < box.z.size(); ++j)
    sweep += std::fabs(f.x_slope[j]) * box.z[j].mag();
  return sweep + f.pad;
}

// Parameter arc {t in [lo, hi] : X(t) in [L, U]} containing t*, for the
// quadratic centre curve.  Empty optional when t* itself is outside.
std::optional<std::pair<double, double>> quad_arc(const FoldingFamily& f,
                                                  double L, double U,
                                                  double tstar, double lo,
                                                  double hi) {
  auto inside = [&](double t) {
    double v = f.x_center(t);
    return v >= L && v <= U;
  };
  if (!inside(tstar)) return std::nullopt;
  // March outward from t* to the arc edges by bisection against the first
  // exit; the quadratic has at most one exit on each side.
  auto edge = [&](double dir) {
    double a = tstar, b = dir;
    if (inside(b)) return b;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (a + b);
      (inside(mid) ? a : b) = mid;
    }
    return a;
  };
  return std::make_pair(edge(lo), edge(hi));
}

}  // namespace

Expected<FoldStep> reproduce_folding(const CoverContext& cx,
                                     const FoldingFamily& family,
                                     FoldMode mode, double tangent_threshold,
                                     int forced_map) {
  const Model& model = *cx.model;
  const BoxXYZ& box = model.elements[family.element];
  PsiEnv env = make_psi_env(model);

  // Marker contact: the centre curve touches a marked leaf inside the
  // unstable cone.
  for (const auto& mk : family.markers) {
    double mx = mk.leaf.x_enclosure.mid();
    double tbest = family.vertex(0.0, 1.0);
    double dbest = std::fabs(family.x_center(tbest) - mx);
    for (double t : {0.0, 1.0}) {
      double d = std::fabs(family.x_center(t) - mx);
      if (d < dbest) {
        dbest = d;
        tbest = t;
      }
    }
    if (dbest <= tangent_threshold + mk.leaf.x_enclosure.rad() + family.pad) {
      Tangent dir;
      dir.dx = family.dx_center(tbest);
      dir.dy = family.y_c1;
      dir.dz.assign(box.z.size(), 0.0);
      double slack = cone_slack_u(dir, cx.cones.k.k_u);
      if (slack >= 0.0) {
        FoldStep st;
        st.tangency = true;
        st.t = tbest;
        st.slack = slack;
        st.family = family;
        return st;
      }
    }
  }

  double v = family.vertex(0.0, 1.0);
  SsDisc tip = family.fiber(v);
  Interval T = x_projection(tip, box);

  // Candidate strip: base windows first, centre windows as fallback.
  const MapDef* chosen = nullptr;
  const StripWindow* cw = nullptr;
  auto consider = [&](bool use_center) {
    double best_key = std::numeric_limits<double>::infinity();
    for (const auto& m : model.maps) {
      if (!m.evaluable()) continue;
      if (forced_map > 0 && m.id != forced_map) continue;
      if (mode == FoldMode::Arrayed && forced_map == 0) {
        bool in_array = false;
        for (const auto& a : model.arrays)
          for (int id : a.maps)
            if (id == m.id) in_array = true;
        if (!in_array) continue;
      }
      const StripWindow* w = window_of(cx, m.id);
      if (!w) continue;
      Interval win = use_center ? w->center : w->base;
      if (use_center && !w->has_center) continue;
      if (!win.strictly_encloses(T)) continue;
      double key = use_center
                       ? -std::min(T.lo - win.lo, win.hi - T.hi)  // deepest
                       : std::fabs(win.mid() - T.mid());          // nearest
      if (key < best_key - 1e-18 ||
          (std::fabs(key - best_key) <= 1e-18 && chosen && m.id < chosen->id)) {
        best_key = key;
        chosen = &m;
        cw = w;
      }
    }
  };
  consider(false);
  if (!chosen) consider(true);
  if (!chosen) {
    // Boundary deficit: how far the tip extent pokes out of every base
    // window.  A vanishing deficit is a fold pinned on a window boundary.
    double deficit = std::numeric_limits<double>::infinity();
    for (const auto& w : cx.windows) {
      double d = std::max({w.base.lo - T.lo, T.hi - w.base.hi, 0.0});
      deficit = std::min(deficit, d);
    }
    if (deficit <= tangent_threshold + 2.0 * fibre_radius(family, box)) {
      FoldStep st;
      st.tangency = true;
      st.t = v;
      st.slack = deficit;
      st.family = family;
      return st;
    }
    return Error{"STUCK", "no window contains the fold tip (extent [" +
                              fmt(T.lo) + ", " + fmt(T.hi) + "], deficit " +
                              fmt(deficit) + ")"};
  }

  // Parameter range whose centre stays in the window shrunk by the fibre
  // radius, then restrict, renormalize and pull through the strip.
  double rho = fibre_radius(family, box);
  double kappa = std::max(1e-12, 1e-9 * cw->base.width());
  Interval target = (forced_map > 0 && !cw->base.strictly_encloses(T))
                        ? cw->center
                        : cw->base;
  double L = target.lo + rho + kappa, U = target.hi - rho - kappa;
  if (L >= U)
    return Error{"STUCK", "window too thin for the fibre radius"};
  auto arc = quad_arc(family, L, U, v, 0.0, 1.0);
  if (!arc)
    return Error{"STUCK", "fold tip left the selected window"};
  FoldingFamily restricted = restrict_family(family, arc->first, arc->second);
  auto pulled = pull_family(cx, restricted, *chosen, env);
  if (!pulled.ok()) return pulled.error();

  FoldStep st;
  st.tangency = false;
  st.family = *pulled;
  st.strip = chosen->id;
  st.offset = arc->first;
  st.scale = arc->second - arc->first;
  return st;
}

// --- tangency location -----------------------------------------------------

Expected<TangencyResult> locate_tangency(const CoverContext& cx,
                                         const FoldingFamily& family,
                                         double tol, int max_depth,
                                         double tangent_threshold,
                                         std::vector<TraceRow>* trace_out) {
  const Model& model = *cx.model;
  PsiEnv env = make_psi_env(model);
  FoldingFamily fam = family;
  double off = 0.0, sc = 1.0;
  std::vector<int> word;
  std::vector<TraceRow> trace;
  TraceMirror mirror{trace_out, &trace};
  Interval running = model.elements[family.element].x;

  {
    TraceRow r;
    r.step = 0;
    r.element = family.element;
    r.strip = 0;
    r.x = fam.x_extent(model.elements[family.element]);
    r.kind = "start";
    trace.push_back(r);
  }

  auto finish = [&](double param_local, double slack,
                    int depth) -> TangencyResult {
    TangencyResult res;
    res.leaf.element = family.element;
    res.leaf.x_window = running;
    res.leaf.coding_prefix = Coding{CodingKind::Strip, word};
    res.parameter = off + sc * param_local;
    const BoxXYZ& dbox = model.elements[fam.element];
    Point3 p;
    p.x = fam.x_center(param_local);
    p.y = fam.y_center(param_local);
    p.z.resize(dbox.z.size());
    for (size_t j = 0; j < p.z.size(); ++j) p.z[j] = dbox.z[j].mid();
    res.point = p;
    auto fp = detect_cu_tangent(fam, cx.cones.k.k_u);
    res.tangent_margin = fp ? fp->slack : slack;
    res.depth = depth;
    res.trace = trace;
    return res;
  };

  for (int depth = 0; depth < max_depth; ++depth) {
    auto step = reproduce_folding(cx, fam, FoldMode::Separated,
                                  tangent_threshold, 0);
    if (!step.ok()) return step.error();
    if (step->tangency) return finish(step->t, step->slack, depth);

    word.push_back(step->strip);
    off = off + sc * step->offset;
    sc = sc * step->scale;
    fam = step->family;

    Interval cyl = forward_compose(model, word,
                                   Interval(-model.bcg.x_B, model.bcg.x_B), env);
    Interval meet;
    if (!intersect(running, cyl, &meet))
      return Error{"INVARIANT_BREACH",
                   "fold enclosure left the running intersection"};
    running = meet;
    TraceRow r;
    r.step = depth + 1;
    r.element = fam.element;
    r.strip = step->strip;
    r.x = cyl;
    r.kind = "fold";
    trace.push_back(r);

    if (running.width() <= tol)
      return finish(fam.vertex(0.0, 1.0), 0.0, depth + 1);
  }
  return Error{"MAX_DEPTH", "enclosure width " + fmt(running.width()) +
                                " above tolerance after " +
                                std::to_string(max_depth) + " steps"};
}

// --- array coding injection ------------------------------------------------

namespace {

// The array whose common base window holds the fold tip deepest.
const ArrayDef* tip_array(const CoverContext& cx, const FoldingFamily& f) {
  const Model& model = *cx.model;
  const BoxXYZ& box = model.elements[f.element];
  Interval T = x_projection(f.fiber(f.vertex(0.0, 1.0)), box);
  const ArrayDef* best = nullptr;
  double best_depth = -std::numeric_limits<double>::infinity();
  for (const auto& a : model.arrays) {
    bool ok = !a.maps.empty();
    Interval common;
    bool first = true;
    for (int id : a.maps) {
      const StripWindow* w = window_of(cx, id);
      if (!w) {
        ok = false;
        break;
      }
      if (first) {
        common = w->base;
        first = false;
      } else if (!intersect(common, w->base, &common)) {
        ok = false;
        break;
      }
    }
    if (!ok || !common.strictly_encloses(T)) continue;
    double d = std::min(T.lo - common.lo, common.hi - T.hi);
    if (d > best_depth) {
      best_depth = d;
      best = &a;
    }
  }
  return best;
}

// Frame array for coding refinement: first-slot fixed point nearest the
// element centre.  Every refinement chain runs in this one frame, so sibling
// windows separate by the exact slot shift and ancestor windows keep nesting
// no matter where the folds themselves wander.
const ArrayDef* frame_array(const Model& model) {
  const ArrayDef* best = nullptr;
  double best_fp = std::numeric_limits<double>::infinity();
  for (const auto& a : model.arrays) {
    if (a.maps.empty()) continue;
    const MapDef& m = model.map_by_id(a.maps.front());
    if (std::fabs(1.0 - m.A) < 1e-9) continue;
    double fp = std::fabs(m.B / (1.0 - m.A));
    if (fp < best_fp || (fp == best_fp && best && a.slot < best->slot)) {
      best_fp = fp;
      best = &a;
    }
  }
  return best;
}

// Smallest interval (up to `slack` padding) mapped into itself by every slot
// map of the frame array.  It encloses the x-value of every infinite slot
// continuation, so a prefix window built from it contains the windows of all
// the prefix's extensions.
Expected<Interval> continuation_hull(const Model& model, const ArrayDef& frame,
                                     const PsiEnv& env, double slack) {
  Interval H;
  bool first = true;
  for (int id : frame.maps) {
    const MapDef& m = model.map_by_id(id);
    if (std::fabs(1.0 - m.A) < 1e-9)
      return Error{"INVARIANT_BREACH", "frame strip has no fixed point"};
    Interval fp = Interval::point(m.B / (1.0 - m.A));
    H = first ? fp : hull(H, fp);
    first = false;
  }
  H = H + Interval(-slack, slack);
  for (int iter = 0; iter < 80; ++iter) {
    Interval img;
    bool start = true;
    for (int id : frame.maps) {
      const MapDef& m = model.map_by_id(id);
      Interval one = affine_image(H, m.A, m.B);
      if (!m.psi.empty()) one = one + psi_hull(m, 1, H, env);
      img = start ? one : hull(img, one);
      start = false;
    }
    img = outward(img);
    if (H.encloses(img)) return H;
    H = hull(H, img) + Interval(-slack, slack);
  }
  return Error{"NO_CONVERGE", "slot maps admit no invariant refinement hull"};
}

}  // namespace

Expected<LeafBox> coding_to_tangency(const CoverContext& cx,
                                     const FoldingFamily& family,
                                     const Coding& prefix, double tol) {
  const Model& model = *cx.model;
  if (model.arrays.empty())
    return Error{"INVARIANT_BREACH", "model carries no folding arrays"};
  PsiEnv env = make_psi_env(model);

  const ArrayDef* start = tip_array(cx, family);
  if (!start)
    return Error{"STUCK", "no array base window contains the fold tip"};
  const ArrayDef* frame = frame_array(model);
  if (!frame)
    return Error{"INVARIANT_BREACH", "model arrays carry no usable strips"};

  // Empty prefix: the enclosing window of the starting array.
  if (prefix.symbols.empty()) {
    Interval W;
    bool first = true;
    for (int id : start->maps) {
      const StripWindow* w = window_of(cx, id);
      if (!w) return Error{"INVARIANT_BREACH", "array strip has no window"};
      W = first ? w->base : hull(W, w->base);
      first = false;
    }
    LeafBox lb;
    lb.element = family.element;
    lb.x_window = W;
    lb.coding_prefix = prefix;
    return lb;
  }

  double slack = std::min(tol, 1e-9);
  auto H = continuation_hull(model, *frame, env, slack);
  if (!H.ok()) return H.error();

  FoldingFamily fam = family;
  std::vector<int> word;
  word.reserve(prefix.symbols.size());
  for (size_t n = 0; n < prefix.symbols.size(); ++n) {
    int slot = prefix.symbols[n];
    const ArrayDef* dyn = tip_array(cx, fam);
    if (!dyn)
      return Error{"STUCK", "no array base window contains the fold tip"};
    const ArrayDef* sym = (n == 0) ? start : frame;
    if (slot < 1 || slot > static_cast<int>(dyn->maps.size()) ||
        slot > static_cast<int>(sym->maps.size()))
      return Error{"INVARIANT_BREACH",
                   "slot " + std::to_string(slot) + " outside the array arity"};
    // Certified reproduction through the array the fold actually inhabits;
    // the window chain below records the same slot in the shared frame.
    auto step = reproduce_folding(cx, fam, FoldMode::Arrayed, 1e-300,
                                  dyn->maps[slot - 1]);
    if (!step.ok()) return step.error();
    if (step->tangency)
      return Error{"STUCK", "fold degenerated while injecting the coding"};
    fam = step->family;
    word.push_back(sym->maps[slot - 1]);
  }

  LeafBox lb;
  lb.element = family.element;
  lb.x_window = forward_compose(model, word, *H, env);
  lb.coding_prefix = prefix;
  return lb;
}

// --- seed families ---------------------------------------------------------

namespace {

FoldingFamily seed_family(const Model& model, int element, double tip,
                          double h) {
  const BoxXYZ& box = model.elements[element];
  FoldingFamily f;
  f.element = element;
  // X(t) = tip + h ((t - 1/2)^2 - 1/8): extent [tip - h/8, tip + h/8].
  f.x_c2 = h;
  f.x_c1 = -h;
  f.x_c0 = tip + h / 8.0;
  f.y_c0.resize(box.y.size());
  f.y_c1.resize(box.y.size());
  for (size_t i = 0; i < f.y_c0.size(); ++i) {
    f.y_c0[i] = box.y[i].lo + 0.2 * box.y[i].width();
    f.y_c1[i] = 0.6 * box.y[i].width();
  }
  f.x_slope.assign(box.z.size(), 0.0);
  f.y_slope.assign(box.y.size(), std::vector<double>(box.z.size(), 0.0));
  f.pad = 0.0;
  f.lip_x = 0.0;
  f.lip_y = 0.0;
  f.kind = FoldKind::FoldRight;
  return f;
}

}  // namespace

Expected<FoldingFamily> make_folding_family(const CoverContext& cx) {
  const Model& model = *cx.model;
  const StripWindow* best = nullptr;
  for (const auto& w : cx.windows) {
    if (!w.has_center) continue;
    if (!best || w.center.width() > best->center.width() ||
        (w.center.width() == best->center.width() && w.map_id < best->map_id))
      best = &w;
  }
  if (!best)
    return Error{"INVARIANT_BREACH", "model has no centre windows"};
  int element = model.map_by_id(best->map_id).source;
  return seed_family(model, element, best->center.mid(),
                     2.0 * best->center.rad());
}

Expected<FoldingFamily> make_exact_array_family(const CoverContext& cx) {
  const Model& model = *cx.model;
  if (model.arrays.empty())
    return Error{"INVARIANT_BREACH", "model carries no folding arrays"};
  const ArrayDef* best = nullptr;
  Interval best_common;
  for (const auto& a : model.arrays) {
    Interval common;
    bool first = true, ok = !a.maps.empty();
    for (int id : a.maps) {
      const StripWindow* w = window_of(cx, id);
      if (!w || !w->has_center) {
        ok = false;
        break;
      }
      if (first) {
        common = w->center;
        first = false;
      } else if (!intersect(common, w->center, &common)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (!best || common.width() > best_common.width() ||
        (common.width() == best_common.width() && a.slot < best->slot)) {
      best = &a;
      best_common = common;
    }
  }
  if (!best)
    return Error{"INVARIANT_BREACH", "no array has a common centre window"};
  int element = model.map_by_id(best->maps.front()).source;
  return seed_family(model, element, best_common.mid(),
                     2.0 * best_common.rad());
}

// --- prefolding ------------------------------------------------------------

namespace {

constexpr double kPrefoldDev = 1e-9;

Expected<const MapDef*> gap_map(const Model& model, bool plus) {
  int id = plus ? model.gap_plus_map : model.gap_minus_map;
  if (id <= 0)
    return Error{"INVARIANT_BREACH", "model declares no gap strips"};
  const MapDef& m = model.map_by_id(id);
  if (!m.evaluable()) return Error{"OPAQUE", "gap strip is bounds-only"};
  if (std::fabs(1.0 - m.A) < 1e-12)
    return Error{"INVARIANT_BREACH", "gap strip has no fixed point"};
  return &m;
}

}  // namespace

Expected<double> prefold_mu_limit(const CoverContext& cx, int n_period) {
  const Model& model = *cx.model;
  if (n_period < 1) return Error{"BAD_MU", "n_period must be at least 1"};
  auto gm = gap_map(model, false);
  if (!gm.ok()) return gm.error();
  double fp = (*gm)->B / (1.0 - (*gm)->A);
  double apow = std::pow(std::fabs((*gm)->A), n_period);
  return (model.bcg.x_B - kPrefoldDev - fp) * apow;
}

Expected<FoldingFamily> make_prefolding(const CoverContext& cx,
                                        PrefoldScenario scenario, int n_period,
                                        double mu) {
  const Model& model = *cx.model;
  if (n_period < 1) return Error{"BAD_MU", "n_period must be at least 1"};
  PsiEnv env = make_psi_env(model);
  auto gm = gap_map(model, false);
  if (!gm.ok()) return gm.error();
  auto gp = gap_map(model, true);
  if (!gp.ok()) return gp.error();
  const MapDef& minus = **gm;
  const MapDef& plus = **gp;
  const double fp_minus = minus.B / (1.0 - minus.A);
  const double fp_plus = plus.B / (1.0 - plus.A);
  const double x_B = model.bcg.x_B;
  const double x_C = model.bcg.x_C;

  if (scenario == PrefoldScenario::RightCase) {
    if (mu <= 0.0) return Error{"BAD_MU", "displacement must be positive"};
    auto limit = prefold_mu_limit(cx, n_period);
    if (!limit.ok()) return limit.error();

    // Unfolded tangency restricted to the piece bounded by its two gap-leaf
    // crossings: X(t) = fp- + mu - 4 mu (t - 1/2)^2, so the t = 0, 1 fibres
    // sit exactly on the leaf and the tip rises mu above it.
    FoldingFamily f = seed_family(model, minus.source, 0.0, 0.0);
    f.x_c2 = -4.0 * mu;
    f.x_c1 = 4.0 * mu;
    f.x_c0 = fp_minus;
    f.kind = FoldKind::PrefoldRight;
    for (double tm : {0.0, 1.0}) {
      FoldMarker mk;
      mk.t = tm;
      mk.leaf.element = minus.source;
      mk.leaf.strips = {minus.id};
      mk.leaf.period = 1;
      mk.leaf.x_enclosure = inflate(Interval::point(fp_minus), 1e-12);
      f.markers.push_back(mk);
    }

    const Interval domain(minus.B - std::fabs(minus.A) * (1.0 - 1e-9),
                          minus.B + std::fabs(minus.A) * (1.0 - 1e-9));
    auto transport = [&](FoldingFamily& fam) -> Expected<bool> {
      double v = fam.vertex(0.0, 1.0);
      double tipx = fam.x_center(v);
      if (!domain.contains(tipx))
        return Error{"BAD_MU",
                     "fold tip left the gap-strip domain during transport"};
      // Trim arms to the pull domain; the tip and both markers survive.
      auto arc = quad_arc(fam, domain.lo, domain.hi, v, 0.0, 1.0);
      if (!arc) return Error{"BAD_MU", "transport arc collapsed"};
      FoldingFamily r = restrict_family(fam, arc->first, arc->second);
      auto pulled = pull_family(cx, r, minus, env);
      if (!pulled.ok()) return pulled.error();
      fam = *pulled;
      return true;
    };
    for (int j = 0; j < n_period; ++j) {
      auto r = transport(f);
      if (!r.ok()) return r.error();
    }
    double tip = f.x_center(f.vertex(0.0, 1.0));
    if (tip > x_B - kPrefoldDev)
      return Error{"BAD_MU",
                   "displacement " + fmt(mu) + " at or above the limit " +
                       fmt(*limit) + " (tip " + fmt(tip) + ")"};
    for (int extra = 0; extra < 64; ++extra) {
      const BoxXYZ& box = model.elements[f.element];
      Interval ext = f.x_extent(box);
      if (ext.intersects(Interval(-x_C, x_C))) break;
      double next_tip = (tip - minus.B) / minus.A;
      if (next_tip > x_B - kPrefoldDev)
        return Error{"BAD_MU",
                     "centre region unreachable: the next transport step "
                     "overshoots the base region (tip " +
                         fmt(next_tip) + ")"};
      auto r = transport(f);
      if (!r.ok()) return r.error();
      tip = f.x_center(f.vertex(0.0, 1.0));
    }
    const BoxXYZ& box = model.elements[f.element];
    if (!f.x_extent(box).intersects(Interval(-x_C, x_C)))
      return Error{"BAD_MU", "centre region unreachable for this displacement"};
    if (f.markers.size() < 2)
      return Error{"INVARIANT_BREACH", "transport lost the gap-leaf markers"};
    return f;
  }

  // Left case: the tangent family (tip pinned on the left gap leaf, opening
  // toward the right) is transported backward until the widened sheet meets
  // the right gap leaf twice; restriction to those crossings puts the end
  // fibres on the leaf with the centre region swept in between.
  FoldingFamily f = seed_family(model, minus.source, 0.0, 0.0);
  const double h0 = 0.05;
  f.x_c2 = h0;
  f.x_c1 = -h0;
  f.x_c0 = fp_minus + h0 / 4.0;  // X(t) = fp- + h0 (t - 1/2)^2
  f.kind = FoldKind::PrefoldLeft;
  f.markers.clear();

  const Interval domain(minus.B - std::fabs(minus.A) * (1.0 - 1e-9),
                        minus.B + std::fabs(minus.A) * (1.0 - 1e-9));
  const double need = fp_plus - fp_minus;
  int pulls = 0;
  for (; pulls < n_period + 64; ++pulls) {
    double reach = f.x_c2 / 4.0;  // X ranges over [fp-, fp- + reach]
    if (pulls >= n_period && reach > need * (1.0 + 1e-9)) break;
    double v = f.vertex(0.0, 1.0);
    auto arc = quad_arc(f, domain.lo, domain.hi, v, 0.0, 1.0);
    if (!arc)
      return Error{"INVARIANT_BREACH", "gap-leaf tangency left the domain"};
    FoldingFamily r = restrict_family(f, arc->first, arc->second);
    auto pulled = pull_family(cx, r, minus, env);
    if (!pulled.ok()) return pulled.error();
    f = *pulled;
    f.kind = FoldKind::PrefoldLeft;
  }
  double reach = f.x_c2 / 4.0;
  if (reach <= need)
    return Error{"INVARIANT_BREACH",
                 "transport failed to span the gap leaves"};
  // Crossings of the right gap leaf: (t - 1/2)^2 = need / h.
  double s = std::sqrt(need / f.x_c2);
  FoldingFamily g = restrict_family(f, 0.5 - s, 0.5 + s);
  g.kind = FoldKind::PrefoldLeft;
  g.markers.clear();
  for (double tm : {0.0, 1.0}) {
    FoldMarker mk;
    mk.t = tm;
    mk.leaf.element = plus.source;
    mk.leaf.strips = {plus.id};
    mk.leaf.period = 1;
    mk.leaf.x_enclosure = inflate(Interval::point(fp_plus), 1e-9 + g.pad);
    g.markers.push_back(mk);
  }
  return g;
}

PrefoldCheck check_prefolding(const CoverContext& cx,
                              const FoldingFamily& family) {
  const Model& model = *cx.model;
  PrefoldCheck pc;
  const double x_B = model.bcg.x_B;
  const double x_C = model.bcg.x_C;
  if (x_C <= 0.0) {
    pc.note = "model has no centre region";
    return pc;
  }
  bool right = family.kind == FoldKind::PrefoldRight;
  if (family.kind != FoldKind::PrefoldRight &&
      family.kind != FoldKind::PrefoldLeft) {
    pc.note = "family is not labelled as prefolding";
    return pc;
  }

  // End fibres on a marked leaf.
  const FoldMarker* m0 = nullptr;
  const FoldMarker* m1 = nullptr;
  for (const auto& mk : family.markers) {
    if (mk.t <= 1e-6 && (!m0 || mk.t < m0->t)) m0 = &mk;
    if (mk.t >= 1.0 - 1e-6 && (!m1 || mk.t > m1->t)) m1 = &mk;
  }
  if (m0 && m1 && m0 != m1) {
    double r0 = std::fabs(family.x_center(m0->t) -
                          m0->leaf.x_enclosure.mid());
    double r1 = std::fabs(family.x_center(m1->t) -
                          m1->leaf.x_enclosure.mid());
    pc.marker_residual = std::max(r0, r1);
    double allow0 = m0->leaf.x_enclosure.rad() + family.pad + 1e-9;
    double allow1 = m1->leaf.x_enclosure.rad() + family.pad + 1e-9;
    pc.markers_on_leaf = r0 <= allow0 && r1 <= allow1;

    // The leaf must sit in the gap slab on the matching side: left slab for
    // right-prefolding, right slab for left-prefolding.
    double lx = m0->leaf.x_enclosure.mid();
    Interval slab = right ? Interval(-x_B, -x_C) : Interval(x_C, x_B);
    pc.gap_margin = std::min(lx - slab.lo, slab.hi - lx);
    pc.leaf_in_gap = pc.gap_margin > 0.0 &&
                     std::fabs(m0->leaf.x_enclosure.mid() -
                               m1->leaf.x_enclosure.mid()) <= 1e-6;
  } else {
    pc.note = "fewer than two markers";
  }

  // Some interior fibre meets the centre region: overlap of the quadratic
  // centre range over the open parameter interval with [-x_C, x_C].
  {
    const double a = 1e-6, b = 1.0 - 1e-6;
    double v = family.vertex(a, b);
    double xlo = std::min({family.x_center(a), family.x_center(b),
                           family.x_center(v)});
    double xhi = std::max({family.x_center(a), family.x_center(b),
                           family.x_center(v)});
    pc.center_reach =
        std::min(xhi, x_C) - std::max(xlo, -x_C) + family.pad;
    pc.center_hit = pc.center_reach > 0.0;
  }

  pc.pass = pc.markers_on_leaf && pc.leaf_in_gap && pc.center_hit;
  if (!pc.pass && pc.note.empty()) {
    pc.note = std::string(pc.markers_on_leaf ? "" : "end fibres off the leaf; ") +
              (pc.leaf_in_gap ? "" : "leaf outside its gap slab; ") +
              (pc.center_hit ? "" : "no fibre reaches the centre region");
  }
  return pc;
}

}  // namespace blender
