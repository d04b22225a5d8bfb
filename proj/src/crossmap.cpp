#include "blenderlab/crossmap.hpp"

#include <algorithm>
#include <cmath>

namespace blender {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Mat = std::vector<std::vector<Interval>>;

Mat as_mat(const Interval& v) { return {{v}}; }
Mat row_mat(const std::vector<Interval>& v) { return {v}; }
Mat col_mat(const std::vector<Interval>& v) {
  Mat m;
  for (const auto& e : v) m.push_back({e});
  return m;
}
Mat hcat(Mat a, const Mat& b) {
  for (size_t i = 0; i < a.size(); ++i)
    a[i].insert(a[i].end(), b[i].begin(), b[i].end());
  return a;
}
Mat vcat(Mat a, const Mat& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
double row_sum_sup(const Mat& m) {
  double best = 0.0;
  for (const auto& row : m) {
    double s = 0.0;
    for (const auto& e : row) s += e.mag();
    best = std::max(best, s);
  }
  return best;
}

Interval scale(double a, const Interval& v) { return Interval::point(a) * v; }

}  // namespace

const MapDef& Model::map_by_id(int id) const {
  for (const auto& m : maps)
    if (m.id == id) return m;
  assert(false && "unknown map id");
  return maps.front();
}

int Model::map_index(int id) const {
  for (size_t i = 0; i < maps.size(); ++i)
    if (maps[i].id == id) return static_cast<int>(i);
  assert(false && "unknown map id");
  return 0;
}

std::vector<Interval> Model::ybar_hull() const {
  std::vector<Interval> h(static_cast<size_t>(du), Interval(0, 0));
  bool first = true;
  for (const auto& e : elements) {
    for (int j = 0; j < du; ++j)
      h[j] = first ? e.y[j] : hull(h[j], e.y[j]);
    first = false;
  }
  return h;
}

bool Model::claimed(const std::string& prop) const {
  return std::find(claims.begin(), claims.end(), prop) != claims.end();
}

// --- psi ------------------------------------------------------------------

double psi_value(const PsiTerm& t, double x, const std::vector<double>& ybar,
                 const std::vector<double>& z) {
  if (t.family == "sin_x") return t.amplitude * std::sin(x);
  if (t.family == "sin_xy")
    return t.amplitude * std::sin(x * (ybar.empty() ? 0.0 : ybar[0]));
  if (t.family == "sin_xz")
    return t.amplitude * std::sin(x + (z.empty() ? 0.0 : z[0]));
  return 0.0;
}

double psi_component(const MapDef& m, int component, double x,
                     const std::vector<double>& ybar,
                     const std::vector<double>& z) {
  double v = 0.0;
  for (const auto& t : m.psi)
    if (t.component == component) v += psi_value(t, x, ybar, z);
  return v;
}

Interval sin_range(const Interval& a) {
  if (a.width() >= 2.0 * kPi) return Interval(-1.0, 1.0);
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  // interior extrema at pi/2 + 2k*pi (max) and -pi/2 + 2k*pi (min)
  const double kmax = std::ceil((a.lo - kPi / 2) / (2 * kPi));
  if (kPi / 2 + 2 * kPi * kmax <= a.hi) hi = 1.0;
  const double kmin = std::ceil((a.lo + kPi / 2) / (2 * kPi));
  if (-kPi / 2 + 2 * kPi * kmin <= a.hi) lo = -1.0;
  return outward(Interval(std::min(lo, hi), std::max(lo, hi)));
}

static Interval cos_range(const Interval& a) {
  return sin_range(a + Interval::point(kPi / 2));
}

PsiBounds psi_bounds(const PsiTerm& t, const Interval& xbox,
                     const Interval& ybox1, const Interval& zbox1) {
  PsiBounds b;
  const Interval zero(0, 0);
  b.d_x = b.d_y1 = b.d_z1 = zero;
  if (t.family == "sin_x") {
    b.value = scale(t.amplitude, sin_range(xbox));
    b.d_x = scale(t.amplitude, cos_range(xbox));
  } else if (t.family == "sin_xy") {
    const Interval arg = xbox * ybox1;
    const Interval c = cos_range(arg);
    b.value = scale(t.amplitude, sin_range(arg));
    b.d_x = scale(t.amplitude, ybox1 * c);
    b.d_y1 = scale(t.amplitude, xbox * c);
  } else if (t.family == "sin_xz") {
    const Interval arg = xbox + zbox1;
    const Interval c = cos_range(arg);
    b.value = scale(t.amplitude, sin_range(arg));
    b.d_x = scale(t.amplitude, c);
    b.d_z1 = scale(t.amplitude, c);
  } else {
    b.value = zero;
  }
  return b;
}

double psi_c1_norm(const Model& model, const MapDef& m, int component) {
  const BoxXYZ& src = model.elements[m.source];
  const auto yh = model.ybar_hull();
  const Interval y1 = yh.empty() ? Interval(0, 0) : yh[0];
  const Interval z1 = src.z.empty() ? Interval(0, 0) : src.z[0];
  double n = 0.0;
  for (const auto& t : m.psi) {
    if (t.component != component) continue;
    const PsiBounds b = psi_bounds(t, src.x, y1, z1);
    n += std::max(std::max(b.value.mag(), b.d_x.mag()),
                  std::max(b.d_y1.mag(), b.d_z1.mag()));
  }
  return n;
}

// --- jacobians ------------------------------------------------------------

namespace {

JacobianBounds assemble_jacobian(const MapDef& m, int du, int dss,
                                 const Interval& xbox, const Interval& ybox1,
                                 const Interval& zbox1) {
  JacobianBounds J;
  const Interval zero(0, 0);
  J.g1_x = Interval::point(m.A);
  J.g1_y.assign(du, zero);
  J.g1_z.assign(dss, zero);
  J.g2_x.assign(du, zero);
  J.g2_y.assign(du, std::vector<Interval>(du, zero));
  J.g2_z.assign(du, std::vector<Interval>(dss, zero));
  J.g3_x.assign(dss, zero);
  J.g3_y.assign(dss, std::vector<Interval>(du, zero));
  J.g3_z.assign(dss, std::vector<Interval>(dss, zero));
  for (int i = 0; i < du; ++i)
    J.g2_y[i][i] = Interval::point(1.0) / Interval::point(m.E[i]);
  for (int j = 0; j < dss; ++j)
    J.g3_z[j][j] = Interval::point(m.C[j]);
  for (const auto& t : m.psi) {
    const PsiBounds b = psi_bounds(t, xbox, ybox1, zbox1);
    if (t.component == 1) {
      J.g1_x = J.g1_x + b.d_x;
      if (du > 0) J.g1_y[0] = J.g1_y[0] + b.d_y1;
      if (dss > 0) J.g1_z[0] = J.g1_z[0] + b.d_z1;
    } else if (t.component == 2) {
      J.g2_x[0] = J.g2_x[0] + b.d_x;
      J.g2_y[0][0] = J.g2_y[0][0] + b.d_y1;
      if (dss > 0) J.g2_z[0][0] = J.g2_z[0][0] + b.d_z1;
    } else if (t.component == 3) {
      J.g3_x[0] = J.g3_x[0] + b.d_x;
      if (du > 0) J.g3_y[0][0] = J.g3_y[0][0] + b.d_y1;
      J.g3_z[0][0] = J.g3_z[0][0] + b.d_z1;
    }
  }
  return J;
}

}  // namespace

JacobianBounds jacobian_bounds(const Model& model, const MapDef& m) {
  if (m.declared) return *m.declared;
  const BoxXYZ& src = model.elements[m.source];
  const auto yh = model.ybar_hull();
  const Interval y1 = yh.empty() ? Interval(0, 0) : yh[0];
  const Interval z1 = src.z.empty() ? Interval(0, 0) : src.z[0];
  return assemble_jacobian(m, model.du, model.dss, src.x, y1, z1);
}

JacobianBounds point_jacobian(const Model& model, const MapDef& m, double x,
                              const std::vector<double>& ybar,
                              const std::vector<double>& z) {
  const Interval xi = Interval::point(x);
  const Interval yi = Interval::point(ybar.empty() ? 0.0 : ybar[0]);
  const Interval zi = Interval::point(z.empty() ? 0.0 : z[0]);
  return assemble_jacobian(m, model.du, model.dss, xi, yi, zi);
}

double row_sum_norm(
    const std::vector<const std::vector<std::vector<Interval>>*>& blocks) {
  Mat m = *blocks.front();
  for (size_t b = 1; b < blocks.size(); ++b) m = hcat(m, *blocks[b]);
  return row_sum_sup(m);
}

// --- verification ---------------------------------------------------------

Expected<HyperbolicityReport> verify_hyperbolicity(const Model& model,
                                                   const MapDef& m) {
  const JacobianBounds J = jacobian_bounds(model, m);
  const Mat xz = vcat(hcat(as_mat(J.g1_x), row_mat(J.g1_z)),
                      hcat(col_mat(J.g3_x), J.g3_z));
  const Mat xz_y = vcat(row_mat(J.g1_y), J.g3_y);
  HyperbolicityReport r;
  r.line1 = row_sum_sup(xz) + row_sum_sup(xz_y);
  r.line2 = row_sum_sup(hcat(col_mat(J.g2_x), J.g2_z)) + row_sum_sup(J.g2_y);
  r.mu = std::max(r.line1, r.line2);
  r.margin = 1.0 - r.mu;
  if (r.mu >= 1.0) {
    const int line = (r.line1 >= r.line2) ? 1 : 2;
    return Error{"VIOLATION",
                 "map " + std::to_string(m.id) + ": contraction line " +
                     std::to_string(line) + " row sum " + std::to_string(r.mu) +
                     " >= 1"};
  }
  return r;
}

Expected<PartialHyperbolicityReport> verify_partial_hyperbolicity(
    const Model& model, const MapDef& m) {
  const JacobianBounds J = jacobian_bounds(model, m);
  PartialHyperbolicityReport r;
  r.center_dx = J.g1_x;
  if (J.g1_x.straddles_zero())
    return Error{"DEGENERATE",
                 "map " + std::to_string(m.id) +
                     ": centre derivative encloses 0, no x-inverse"};
  if (J.g1_x.mag() >= 1.0)
    return Error{"VIOLATION", "map " + std::to_string(m.id) +
                                  ": |centre derivative| reaches " +
                                  std::to_string(J.g1_x.mag()) + " >= 1"};

  // Blocks of the x-inverted map: solve the centre row for dx and substitute.
  const int du = model.du, dss = model.dss;
  const Interval inv = Interval::point(1.0) / J.g1_x;
  const Interval G1x = inv;
  std::vector<Interval> G1y(du), G1z(dss);
  for (int j = 0; j < du; ++j) G1y[j] = -(J.g1_y[j] * inv);
  for (int j = 0; j < dss; ++j) G1z[j] = -(J.g1_z[j] * inv);
  std::vector<Interval> G2x(du), G3x(dss);
  Mat G2y(du, std::vector<Interval>(du)), G2z(du, std::vector<Interval>(dss));
  Mat G3y(dss, std::vector<Interval>(du)), G3z(dss, std::vector<Interval>(dss));
  for (int i = 0; i < du; ++i) {
    G2x[i] = J.g2_x[i] * G1x;
    for (int j = 0; j < du; ++j) G2y[i][j] = J.g2_y[i][j] + J.g2_x[i] * G1y[j];
    for (int j = 0; j < dss; ++j) G2z[i][j] = J.g2_z[i][j] + J.g2_x[i] * G1z[j];
  }
  for (int i = 0; i < dss; ++i) {
    G3x[i] = J.g3_x[i] * G1x;
    for (int j = 0; j < du; ++j) G3y[i][j] = J.g3_y[i][j] + J.g3_x[i] * G1y[j];
    for (int j = 0; j < dss; ++j) G3z[i][j] = J.g3_z[i][j] + J.g3_x[i] * G1z[j];
  }

  r.line1 = row_sum_sup(G3z) + row_sum_sup(hcat(col_mat(G3x), G3y));
  if (r.line1 >= 1.0)
    return Error{"VIOLATION", "map " + std::to_string(m.id) +
                                  ": inverted z-row expression " +
                                  std::to_string(r.line1) + " >= 1"};
  const double P = row_sum_sup(vcat(hcat(as_mat(G1x), row_mat(G1y)),
                                    hcat(col_mat(G2x), G2y)));
  const double Q = row_sum_sup(G3z);
  const double R = row_sum_sup(hcat(col_mat(G3x), G3y));
  if (R >= 1.0)
    return Error{"VIOLATION", "map " + std::to_string(m.id) +
                                  ": inverted coupling row sum " +
                                  std::to_string(R) + " >= 1"};
  r.nu = P * Q / (1.0 - R) +
         row_sum_sup(vcat(row_mat(G1z), G2z));
  if (r.nu >= 1.0)
    return Error{"VIOLATION", "map " + std::to_string(m.id) +
                                  ": inverted composite expression " +
                                  std::to_string(r.nu) + " >= 1"};
  r.margin = std::min({1.0 - r.line1, 1.0 - r.nu, 1.0 - J.g1_x.mag()});
  return r;
}

// --- cone transfer --------------------------------------------------------

namespace {

// Scalar summaries of one map's Jacobian used by the cone-transfer maps.
struct ConeCoeffs {
  double ax, az, ay;      // (xbar,zbar)-rows: x, z and y column groups
  double e_hi, e_dom;     // y-rows vs ybar: sup row sum, diagonal dominance
  double cxz;             // y-rows vs (x, z)
  double a_mig;           // centre derivative magnitude lower bound
  double ry1, rz1;        // centre row: y and z column sums
  double mx3, my3;        // z-rows: x and y column sups
  double c_dom, c_hi;     // z-rows vs z: dominance floor, sup row sum
};

Expected<ConeCoeffs> cone_coeffs(const Model& model, const MapDef& m) {
  const JacobianBounds J = jacobian_bounds(model, m);
  ConeCoeffs c{};
  auto rowsum = [](const std::vector<Interval>& r) {
    double s = 0.0;
    for (const auto& e : r) s += e.mag();
    return s;
  };
  c.ry1 = rowsum(J.g1_y);
  c.rz1 = rowsum(J.g1_z);
  c.a_mig = J.g1_x.mig();
  double m3x = 0, m3y = 0, m3z_hi = 0, m3z_dom = 1e300;
  for (size_t i = 0; i < J.g3_x.size(); ++i) {
    m3x = std::max(m3x, J.g3_x[i].mag());
    m3y = std::max(m3y, rowsum(J.g3_y[i]));
    m3z_hi = std::max(m3z_hi, rowsum(J.g3_z[i]));
    double off = 0.0;
    for (size_t j = 0; j < J.g3_z[i].size(); ++j)
      if (j != i) off += J.g3_z[i][j].mag();
    m3z_dom = std::min(m3z_dom, J.g3_z[i][i].mig() - off);
  }
  c.mx3 = m3x;
  c.my3 = m3y;
  c.c_hi = m3z_hi;
  c.c_dom = (J.g3_x.empty()) ? 1e300 : m3z_dom;
  c.ax = J.g1_x.mag() + m3x;
  c.az = c.rz1 + m3z_hi;
  c.ay = c.ry1 + m3y;
  double e_hi = 0, e_dom = 1e300, cxz = 0;
  for (size_t i = 0; i < J.g2_x.size(); ++i) {
    e_hi = std::max(e_hi, rowsum(J.g2_y[i]));
    double off = 0.0;
    for (size_t j = 0; j < J.g2_y[i].size(); ++j)
      if (j != i) off += J.g2_y[i][j].mag();
    e_dom = std::min(e_dom, J.g2_y[i][i].mig() - off);
    cxz = std::max(cxz, std::max(J.g2_x[i].mag(), rowsum(J.g2_z[i])));
  }
  c.e_hi = e_hi;
  c.e_dom = e_dom;
  c.cxz = cxz;
  if (c.e_dom <= 0.0)
    return Error{"NO_CONE", "map " + std::to_string(m.id) +
                                ": y-block not diagonally dominant"};
  if (c.c_dom <= 0.0)
    return Error{"NO_CONE", "map " + std::to_string(m.id) +
                                ": z-block not diagonally dominant"};
  if (c.a_mig <= 0.0)
    return Error{"NO_CONE",
                 "map " + std::to_string(m.id) + ": centre derivative may vanish"};
  return c;
}

// One application of each transfer map; returns false when the opening blows
// past the divergence guard.
bool transfer_u(const std::vector<ConeCoeffs>& cs, double k, double* out) {
  double worst = 0.0;
  for (const auto& c : cs) {
    if (c.cxz * k >= 1.0) return false;
    const double ylo = (1.0 - c.cxz * k) / c.e_hi;
    const double yhi = (1.0 + c.cxz * k) / c.e_dom;
    worst = std::max(worst, (std::max(c.ax, c.az) * k + c.ay * yhi) / ylo);
  }
  *out = worst;
  return true;
}

bool transfer_s(const std::vector<ConeCoeffs>& cs, double k, double* out) {
  double worst = 0.0;
  for (const auto& c : cs) {
    if (c.ay * k >= 1.0) return false;
    const double lower = (1.0 - c.ay * k) / std::max(c.ax, c.az);
    // backward (x, z)-displacement bounds given |dxbar| + ||dzbar|| <= 1
    const double couple = c.rz1 * c.mx3 / (c.a_mig * c.c_dom);
    if (couple >= 1.0) return false;
    const double p = 1.0 + c.ry1 * k, q = 1.0 + c.my3 * k;
    const double u = (p + c.rz1 * q / c.c_dom) / c.a_mig / (1.0 - couple);
    const double w = (q + c.mx3 * u) / c.c_dom;
    worst = std::max(worst, (c.cxz * (u + w) + c.e_hi * k) / lower);
  }
  *out = worst;
  return true;
}

bool transfer_ss(const std::vector<ConeCoeffs>& cs, double k, double* out) {
  double worst = 0.0;
  for (const auto& c : cs) {
    const double couple = c.rz1 * c.mx3 / (c.a_mig * c.c_dom);
    if (couple >= 1.0) return false;
    const double p = k * (1.0 + c.ry1);
    const double q = 1.0 + c.mx3 * 0.0 + c.my3 * k;  // dzbar normalised to 1
    const double u = (p + c.rz1 * q / c.c_dom) / c.a_mig / (1.0 - couple);
    const double w_up = (q + c.mx3 * u) / c.c_dom;
    const double w_lo = (1.0 - c.mx3 * u - c.my3 * k) / c.c_hi;
    if (w_lo <= 0.0) return false;
    const double dy = c.cxz * (u + w_up) + c.e_hi * k;
    worst = std::max(worst, (u + dy) / w_lo);
  }
  *out = worst;
  return true;
}

// Iterates k <- max(T(k), .) to the fixed point from the floor upward.
template <class F>
bool transfer_fixed_point(F&& f, double start, double* fp) {
  double k = start;
  for (int it = 0; it < 500; ++it) {
    double next;
    if (!f(k, &next) || next > 1.0) return false;
    if (std::fabs(next - k) < 1e-15) {
      *fp = std::max(next, k);
      return true;
    }
    k = std::max(next, start);
    if (next <= start) {
      *fp = start;
      return true;
    }
  }
  *fp = k;
  return true;
}

}  // namespace

Expected<ConeReport> cone_constants_for(const Model& model) {
  std::vector<ConeCoeffs> cs;
  for (const auto& m : model.maps) {
    auto c = cone_coeffs(model, m);
    if (!c.ok()) return c.error();
    cs.push_back(*c);
  }
  ConeReport r;
  r.floor = model.cone_floor;
  double ku, ks, kss;
  if (!transfer_fixed_point(
          [&](double k, double* o) { return transfer_u(cs, k, o); }, r.floor,
          &ku))
    return Error{"NO_CONE", "u-cone transfer does not contract"};
  if (!transfer_fixed_point(
          [&](double k, double* o) { return transfer_s(cs, k, o); }, r.floor,
          &ks))
    return Error{"NO_CONE", "s-cone transfer does not contract"};
  if (!transfer_fixed_point(
          [&](double k, double* o) { return transfer_ss(cs, k, o); }, r.floor,
          &kss))
    return Error{"NO_CONE", "ss-cone transfer does not contract"};
  // Open the constants a whisker above the fixed points so boundary vectors
  // land strictly inside after one step.
  auto pad = [&](double k) { return (k <= r.floor) ? r.floor : 1.05 * k; };
  r.k.k_u = pad(ku);
  r.k.k_s = pad(ks);
  r.k.k_ss = pad(kss);
  double t;
  transfer_u(cs, r.k.k_u, &t);
  r.u_gap = r.k.k_u - t;
  transfer_s(cs, r.k.k_s, &t);
  r.s_gap = r.k.k_s - t;
  transfer_ss(cs, r.k.k_ss, &t);
  r.ss_gap = r.k.k_ss - t;
  if (r.u_gap < 0 || r.s_gap < 0 || r.ss_gap < 0)
    return Error{"NO_CONE", "cone constants not invariant at the floor"};
  double expansion = 1e300, contraction = 0.0;
  for (const auto& c : cs) {
    expansion = std::min(expansion, (1.0 - c.cxz * r.k.k_u) / c.e_hi);
    const double yfac = (1.0 + c.cxz) / c.e_dom;
    contraction =
        std::max(contraction, c.c_hi + (c.mx3 + c.my3 * yfac) * r.k.k_ss);
  }
  r.expansion = expansion;
  r.contraction = contraction;
  return r;
}

// --- budgets --------------------------------------------------------------

double DeviationBudget::max_delta_ss() const {
  double m = 0.0;
  for (double v : delta_ss) m = std::max(m, v);
  return m;
}
double DeviationBudget::max_delta() const {
  double m = 0.0;
  for (double v : delta_map) m = std::max(m, v);
  return m;
}

DeviationBudget budgets_for(const Model& model, const ConeReport& cones) {
  (void)cones;
  // Lipschitz transfer for the canonical ss-disc class: slopes contract by
  // C/A per backward step (x) and C/E (y); psi contributes the inhomogeneous
  // term.  Affine models have fixed point zero, the model floor then rules.
  double kx = 0.0, ky = 0.0;
  for (int it = 0; it < 200; ++it) {
    double nx = 0.0, ny = 0.0;
    for (const auto& m : model.maps) {
      if (m.declared) continue;
      const JacobianBounds J = jacobian_bounds(model, m);
      double cmax = 0.0;
      for (double cc : m.C) cmax = std::max(cmax, std::fabs(cc));
      const double a = J.g1_x.mig();
      if (a <= 0.0) continue;
      double p1z = 0, p1y = 0, e_hi = 0, p2x = 0, p2y = 0;
      for (const auto& e : J.g1_z) p1z = std::max(p1z, e.mag());
      for (const auto& e : J.g1_y) p1y = std::max(p1y, e.mag());
      for (size_t i = 0; i < J.g2_y.size(); ++i) {
        double rs = 0;
        for (const auto& e : J.g2_y[i]) rs += e.mag();
        e_hi = std::max(e_hi, rs);
        p2x = std::max(p2x, J.g2_x[i].mag());
      }
      p2y = p1y;  // same psi coupling structure
      nx = std::max(nx, (kx * cmax + p1z + p1y * ky * cmax) / a);
      ny = std::max(ny, ky * cmax * (e_hi + p2y) + p2x * nx);
    }
    if (std::fabs(nx - kx) + std::fabs(ny - ky) < 1e-16) break;
    kx = nx;
    ky = ny;
  }
  const double lip = std::max(std::max(kx, ky), model.budget_floor);

  DeviationBudget b;
  b.delta_ss.resize(model.elements.size());
  b.delta_u.resize(model.elements.size());
  for (size_t e = 0; e < model.elements.size(); ++e) {
    b.delta_ss[e] = lip * model.elements[e].z_rad();
    b.delta_u[e] = lip * model.elements[e].y_rad();
  }
  int max_id = -1;
  for (const auto& m : model.maps) max_id = std::max(max_id, m.id);
  b.delta_map.assign(static_cast<size_t>(max_id + 1), 0.0);
  const double dss = b.delta_ss.empty() ? 0.0 : *std::max_element(
                         b.delta_ss.begin(), b.delta_ss.end());
  const double dus = b.delta_u.empty() ? 0.0 : *std::max_element(
                         b.delta_u.begin(), b.delta_u.end());
  for (const auto& m : model.maps) {
    double d = std::max(dss, dus);
    if (!m.declared) {
      d = std::max(d, psi_c1_norm(model, m, 1));
    }
    b.delta_map[static_cast<size_t>(m.id)] = d;
    b.delta_tilde = std::max(b.delta_tilde, d);
  }
  return b;
}

// --- evaluation -----------------------------------------------------------

Expected<Point3> eval_forward(const Model& model, int map_id, const Point3& p,
                              int target) {
  const MapDef& m = model.map_by_id(map_id);
  if (!m.evaluable())
    return Error{"OPAQUE", "map " + std::to_string(map_id) +
                               " is bounds-only and cannot be evaluated"};
  std::vector<double> ybar(p.y.size());
  for (size_t i = 0; i < p.y.size(); ++i) ybar[i] = m.E[i] * (p.y[i] - m.c[i]);
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const double corr = psi_component(m, 2, p.x, ybar, p.z);
    std::vector<double> next = ybar;
    next[0] = m.E[0] * (p.y[0] - m.c[0] - corr);
    double diff = 0.0;
    for (size_t i = 0; i < ybar.size(); ++i)
      diff = std::max(diff, std::fabs(next[i] - ybar[i]));
    ybar = next;
    if (diff < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged)
    return Error{"NO_CONVERGE", "fibre solve did not converge on map " +
                                    std::to_string(map_id)};
  const BoxXYZ& tb = model.elements[target];
  for (size_t i = 0; i < ybar.size(); ++i)
    if (!tb.y[i].contains(ybar[i]))
      return Error{"NOT_IN_STRIP",
                   "image fibre coordinate " + std::to_string(ybar[i]) +
                       " outside target element " + std::to_string(target)};
  Point3 out;
  out.x = m.A * p.x + m.B + psi_component(m, 1, p.x, ybar, p.z);
  out.y = ybar;
  out.z.resize(p.z.size());
  for (size_t j = 0; j < p.z.size(); ++j) out.z[j] = m.zeta[j] + m.C[j] * p.z[j];
  if (!p.z.empty()) out.z[0] += psi_component(m, 3, p.x, ybar, p.z);
  return out;
}

Expected<Point3> eval_backward(const Model& model, int map_id,
                               const Point3& image) {
  const MapDef& m = model.map_by_id(map_id);
  if (!m.evaluable())
    return Error{"OPAQUE", "map " + std::to_string(map_id) +
                               " is bounds-only and cannot be evaluated"};
  double x = (image.x - m.B) / m.A;
  std::vector<double> z(image.z.size());
  for (size_t j = 0; j < z.size(); ++j) z[j] = (image.z[j] - m.zeta[j]) / m.C[j];
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const double nx =
        (image.x - m.B - psi_component(m, 1, x, image.y, z)) / m.A;
    std::vector<double> nz = z;
    if (!z.empty())
      nz[0] = (image.z[0] - m.zeta[0] - psi_component(m, 3, x, image.y, z)) /
              m.C[0];
    double diff = std::fabs(nx - x);
    for (size_t j = 0; j < z.size(); ++j)
      diff = std::max(diff, std::fabs(nz[j] - z[j]));
    x = nx;
    z = nz;
    if (diff < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged)
    return Error{"NO_CONVERGE", "backward solve did not converge on map " +
                                    std::to_string(map_id)};
  Point3 out;
  out.x = x;
  out.z = z;
  out.y.resize(image.y.size());
  for (size_t i = 0; i < out.y.size(); ++i)
    out.y[i] = m.c[i] + image.y[i] / m.E[i];
  if (!out.y.empty()) out.y[0] += psi_component(m, 2, x, image.y, z);
  return out;
}

Model with_psi(const Model& model, double amp) {
  Model out = model;
  out.name += "+psi";
  double emax = 1.0;
  for (const auto& m : model.maps)
    for (double e : m.E) emax = std::max(emax, std::fabs(e));
  for (auto& m : out.maps) {
    if (!m.evaluable()) continue;
    m.psi.push_back({"sin_x", 1, amp});
    m.psi.push_back({"sin_xy", 2, amp / (2.0 * emax)});
    m.psi.push_back({"sin_xz", 3, amp});
  }
  return out;
}

Model invert_partition(const Model& model) {
  Model out;
  out.name = model.name + "+inv";
  out.du = model.dss;
  out.dss = model.du;
  out.elements.reserve(model.elements.size());
  for (const auto& e : model.elements) {
    BoxXYZ b;
    b.x = e.x;
    b.y = e.z;  // expanding and strong-stable fibres trade places
    b.z = e.y;
    out.elements.push_back(b);
  }
  out.bcg = model.bcg;
  out.claims = model.claims;
  out.arrays = model.arrays;
  out.cone_floor = model.cone_floor;
  out.budget_floor = model.budget_floor;
  out.gap_minus_map = model.gap_minus_map;
  out.gap_plus_map = model.gap_plus_map;
  out.maps.reserve(model.maps.size());
  for (const auto& m : model.maps) {
    MapDef h;
    h.id = m.id;
    h.source = m.source;
    h.E.assign(m.C.size(), 0.0);
    h.c.assign(m.C.size(), 0.0);
    h.C.assign(m.E.size(), 0.0);
    h.zeta.assign(m.E.size(), 0.0);
    if (!m.declared) {
      h.A = 1.0 / m.A;
      h.B = -m.B / m.A;
      for (size_t j = 0; j < m.C.size(); ++j) {
        h.E[j] = 1.0 / m.C[j];
        h.c[j] = m.zeta[j];
      }
      for (size_t i = 0; i < m.E.size(); ++i) {
        h.C[i] = 1.0 / m.E[i];
        h.zeta[i] = m.c[i];
      }
    }
    if (m.declared || !m.psi.empty()) {
      // No closed form for the inverse of a perturbed map: publish derivative
      // enclosures obtained by solving the centre row of the forward
      // differential and substituting into the other two.
      const JacobianBounds J = jacobian_bounds(model, m);
      const Interval ax = J.g1_x;
      const Interval one(1.0, 1.0);
      const size_t nu = m.E.empty() ? J.g1_y.size() : m.E.size();
      const size_t ns = m.C.empty() ? J.g1_z.size() : m.C.size();
      JacobianBounds H;
      H.g1_x = one / ax;
      H.g1_y.resize(ns);
      H.g1_z.resize(nu);
      for (size_t j = 0; j < ns; ++j)
        H.g1_y[j] = affine_image(J.g1_z[j] / ax, -1.0, 0.0);
      for (size_t i = 0; i < nu; ++i)
        H.g1_z[i] = affine_image(J.g1_y[i] / ax, -1.0, 0.0);
      H.g2_x.resize(ns);
      H.g2_y.assign(ns, std::vector<Interval>(ns));
      H.g2_z.assign(ns, std::vector<Interval>(nu));
      for (size_t r = 0; r < ns; ++r) {
        const Interval ratio = J.g3_x[r] / ax;
        H.g2_x[r] = ratio;
        for (size_t j = 0; j < ns; ++j)
          H.g2_y[r][j] = J.g3_z[r][j] - ratio * J.g1_z[j];
        for (size_t i = 0; i < nu; ++i)
          H.g2_z[r][i] = J.g3_y[r][i] - ratio * J.g1_y[i];
      }
      H.g3_x.resize(nu);
      H.g3_y.assign(nu, std::vector<Interval>(ns));
      H.g3_z.assign(nu, std::vector<Interval>(nu));
      for (size_t r = 0; r < nu; ++r) {
        const Interval ratio = J.g2_x[r] / ax;
        H.g3_x[r] = ratio;
        for (size_t j = 0; j < ns; ++j)
          H.g3_y[r][j] = J.g2_z[r][j] - ratio * J.g1_z[j];
        for (size_t i = 0; i < nu; ++i)
          H.g3_z[r][i] = J.g2_y[r][i] - ratio * J.g1_y[i];
      }
      h.declared = H;
    }
    out.maps.push_back(std::move(h));
  }
  return out;
}

// --- builtins -------------------------------------------------------------

namespace {

BoxXYZ unit_box(const Interval& y) {
  BoxXYZ b;
  b.x = Interval(-1, 1);
  b.y = {y};
  b.z = {Interval(-1, 1)};
  return b;
}

}  // namespace

Model builtin_horseshoe() {
  Model m;
  m.name = "horseshoe";
  m.elements = {unit_box(Interval(-1, 1))};
  MapDef left;
  left.id = 1;
  left.source = 0;
  left.A = 0.6;
  left.B = -0.3;
  left.E = {3.0};
  left.c = {-0.5};
  left.C = {0.1};
  left.zeta = {-0.4};
  MapDef right = left;
  right.id = 2;
  right.B = 0.3;
  right.E = {-3.0};  // orientation-reversing branch
  right.c = {0.5};
  right.zeta = {0.4};
  m.maps = {left, right};
  m.bcg.x_B = 0.7;
  m.claims = {"A1"};
  return m;
}

Model builtin_affine3() {
  Model m;
  m.name = "affine3";
  m.elements = {unit_box(Interval(-1, 1))};
  for (int i = 0; i < 3; ++i) {
    MapDef d;
    d.id = i + 1;
    d.source = 0;
    d.A = 0.5;
    d.B = -0.6 + 0.6 * i;
    d.E = {10.0};
    d.c = {-0.6 + 0.6 * i};
    d.C = {0.1};
    d.zeta = {-0.5 + 0.5 * i};
    m.maps.push_back(d);
  }
  m.bcg.x_B = 0.9;
  m.bcg.x_C = 0.8;
  m.claims = {"A1", "A3"};
  return m;
}

Model builtin_toy_affine() {
  Model m;
  m.name = "toy-affine";
  m.elements = {unit_box(Interval(-0.35, 0.35))};
  MapDef d;
  d.id = 1;
  d.source = 0;
  d.A = 0.5;
  d.B = 0.0;
  d.E = {3.0};
  d.c = {0.0};
  d.C = {0.1};
  d.zeta = {0.0};
  m.maps = {d};
  m.bcg.x_B = 0.9;
  return m;
}

}  // namespace blender
