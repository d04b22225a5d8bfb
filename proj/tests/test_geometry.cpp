#include "doctest.h"

#include <cmath>
#include <optional>
#include <vector>

#include "blenderlab/geometry.hpp"
#include "oracles.hpp"

using namespace blender;

namespace {

BoxXYZ box111() {
  BoxXYZ b;
  b.x = Interval(-1, 1);
  b.y = {Interval(-1, 1)};
  b.z = {Interval(-1, 1)};
  return b;
}

SsDisc disc(double x0, double slope, double pad) {
  SsDisc d;
  d.element = 0;
  d.x0 = x0;
  d.x_slope = {slope};
  d.y0 = {0.0};
  d.y_slope = {{0.0}};
  d.pad = pad;
  d.lip_x = std::fabs(slope) + pad;
  d.lip_y = pad;
  return d;
}

}  // namespace

TEST_CASE("disc x-projection: constant, affine, padded") {
  const BoxXYZ b = box111();
  Interval flat = x_projection(disc(0.2, 0.0, 0.0), b);
  CHECK(flat.contains(0.2));
  CHECK(flat.width() <= 1e-12);

  Interval aff = x_projection(disc(0.2, 0.1, 0.0), b);
  CHECK(aff.lo == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(aff.hi == doctest::Approx(0.3).epsilon(1e-12));

  // constant core whose only x-variation is the Lipschitz budget plus pad
  SsDisc budget = disc(0.2, 0.0, 0.01);
  budget.lip_x = 0.05;
  Interval wide = x_projection(budget, b);
  CHECK(wide.lo == doctest::Approx(0.14).epsilon(1e-12));
  CHECK(wide.hi == doctest::Approx(0.26).epsilon(1e-12));
}

TEST_CASE("disc x-projection encloses dense samples") {
  const BoxXYZ b = box111();
  auto g = oracle::seeded(21);
  for (int trial = 0; trial < 1000; ++trial) {
    SsDisc d = disc(oracle::urand(g, -0.5, 0.5), oracle::urand(g, -0.2, 0.2),
                    oracle::urand(g, 0.0, 0.05));
    Interval p = x_projection(d, b);
    double lo, hi;
    oracle::sample_disc_x(d, b, 101, &lo, &hi);
    CHECK(p.lo <= lo + 1e-12);
    CHECK(p.hi >= hi - 1e-12);
    // projections only grow with the padding
    SsDisc d2 = d;
    d2.pad += 0.01;
    CHECK(x_projection(d2, b).encloses(p));
  }
}

TEST_CASE("crossing requires the projection strictly inside the window") {
  const BoxXYZ b = box111();
  const Interval base(-0.3, 0.3);
  CHECK(crosses(disc(0.2, 0.05, 0.01), b, base));          // (0.14,0.26)
  CHECK(!crosses(disc(0.2, 0.05, 0.01), b, Interval(0.2, 0.5)));
  // projection [0.1, 0.3] touches the right edge: not a crossing
  CHECK(!crosses(disc(0.2, 0.1, 0.0), b, base));
  // shifting the window outward restores it
  CHECK(crosses(disc(0.2, 0.1, 0.0), b, Interval(-0.31, 0.31)));
}

TEST_CASE("separation is a strict gap in x") {
  const BoxXYZ b = box111();
  const Interval a = x_projection(disc(-0.3, 0.0, 0.01), b);
  const Interval c = x_projection(disc(0.3, 0.0, 0.01), b);
  CHECK(separated(a, c, 0.5));
  CHECK(!separated(a, c, 0.58));   // gap is exactly 0.58
  CHECK(!separated(a, a, 0.0));    // identical extents never separate
  const Interval o = x_projection(disc(-0.29, 0.0, 0.01), b);
  CHECK(!separated(a, o, 0.01));   // overlapping extents
}

TEST_CASE("separated discs cannot both meet one thin disc") {
  const BoxXYZ b = box111();
  SsDisc a = disc(-0.3, 0.0, 0.0);
  SsDisc c = disc(0.3, 0.0, 0.0);
  const double delta = 0.5;
  REQUIRE(separated(x_projection(a, b), x_projection(c, b), delta));
  auto g = oracle::seeded(22);
  for (int trial = 0; trial < 1000; ++trial) {
    // any disc whose projection is narrower than the separation gap
    SsDisc probe = disc(oracle::urand(g, -1, 1), oracle::urand(g, -0.1, 0.1),
                        oracle::urand(g, 0.0, 0.1));
    Interval p = x_projection(probe, b);
    if (p.width() >= delta) continue;
    const bool hits_a = p.intersects(x_projection(a, b));
    const bool hits_c = p.intersects(x_projection(c, b));
    CHECK(!(hits_a && hits_c));
  }
}

TEST_CASE("cone membership follows the slack sign") {
  ConeConstants k;
  k.k_u = 0.1;
  k.k_s = 0.1;
  k.k_ss = 0.1;
  Tangent v;
  v.dx = 0.0;
  v.dy = {1.0};
  v.dz = {0.0};
  CHECK(in_cone(v, k, ConeKind::U));
  v.dx = 0.2;
  CHECK(!in_cone(v, k, ConeKind::U));
  v.dx = 0.03;
  v.dz = {0.05};
  CHECK(in_cone(v, k, ConeKind::U));      // 0.08 <= 0.1
  CHECK(cone_slack_u(v, 0.1) == doctest::Approx(0.02));
  // strong stable: z dominates
  Tangent w;
  w.dx = 0.01;
  w.dy = {0.02};
  w.dz = {1.0};
  CHECK(in_cone(w, k, ConeKind::SS));
  CHECK(!in_cone(v, k, ConeKind::SS));
  // stable cone contains everything transverse to y
  Tangent s;
  s.dx = 1.0;
  s.dy = {0.05};
  s.dz = {0.0};
  CHECK(in_cone(s, k, ConeKind::S));
}

TEST_CASE("cone slack is positively homogeneous") {
  auto g = oracle::seeded(23);
  for (int trial = 0; trial < 200; ++trial) {
    Tangent v;
    v.dx = oracle::urand(g, -1, 1);
    v.dy = {oracle::urand(g, -1, 1)};
    v.dz = {oracle::urand(g, -1, 1)};
    const double c = oracle::urand(g, 0.01, 3.0);
    Tangent cv;
    cv.dx = c * v.dx;
    cv.dy = {c * v.dy[0]};
    cv.dz = {c * v.dz[0]};
    for (double k : {0.05, 0.3, 0.9}) {
      CHECK(cone_slack_u(cv, k) ==
            doctest::Approx(c * cone_slack_u(v, k)).epsilon(1e-12));
      CHECK((cone_slack_u(v, k) >= 0) == (cone_slack_u(cv, k) >= 0));
    }
  }
}

TEST_CASE("folding family geometry") {
  FoldingFamily f;
  f.element = 0;
  f.x_c0 = 0.0;
  f.x_c1 = -0.2;
  f.x_c2 = 1.0;           // x(t) = t^2 - 0.2 t
  f.y_c0 = {0.0};
  f.y_c1 = {1.0};
  f.x_slope = {0.0};
  f.y_slope = {{0.0}};
  f.pad = 0.0;
  CHECK(f.x_center(0.0) == 0.0);
  CHECK(f.x_center(1.0) == doctest::Approx(0.8));
  CHECK(f.dx_center(0.1) == doctest::Approx(0.0));
  CHECK(f.vertex(0.0, 1.0) == doctest::Approx(0.1));
  CHECK(f.vertex(0.5, 1.0) == doctest::Approx(0.5));  // clamped to the range

  const BoxXYZ b = box111();
  Interval ext = f.x_extent(b);
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    CHECK(ext.contains(f.x_center(t)));
  }
  CHECK(ext.lo <= f.x_center(0.1) + 1e-12);  // vertex value included
  // fiber at t reproduces the centre curve
  SsDisc fb = f.fiber(0.3);
  CHECK(fb.x0 == doctest::Approx(f.x_center(0.3)));
}

TEST_CASE("fold detection on quadratic centre curves") {
  FoldingFamily f;
  f.element = 0;
  f.y_c0 = {0.0};
  f.y_c1 = {1.0};
  f.x_slope = {0.0};
  f.y_slope = {{0.0}};
  f.pad = 0.0;

  SUBCASE("pure square folds at zero") {
    f.x_c0 = 0.0;
    f.x_c1 = 0.0;
    f.x_c2 = 1.0;
    auto r = detect_cu_tangent(f, 0.1);
    REQUIRE(r.has_value());
    CHECK(r->t == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r->slack == doctest::Approx(0.1).epsilon(1e-6));
  }
  SUBCASE("steep line never folds") {
    f.x_c0 = 0.5;
    f.x_c1 = 0.3;
    f.x_c2 = 0.0;
    CHECK(!detect_cu_tangent(f, 0.1).has_value());
  }
  SUBCASE("shifted vertex found at 0.1") {
    f.x_c0 = 0.0;
    f.x_c1 = -0.2;
    f.x_c2 = 1.0;
    auto r = detect_cu_tangent(f, 0.1);
    REQUIRE(r.has_value());
    CHECK(r->t == doctest::Approx(0.1).epsilon(1e-9));
  }
}

TEST_CASE("fold detection agrees with finite differences") {
  auto g = oracle::seeded(24);
  const double h = 1e-6;
  int found = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    FoldingFamily f;
    f.element = 0;
    f.x_c0 = oracle::urand(g, -0.3, 0.3);
    f.x_c1 = oracle::urand(g, -0.5, 0.5);
    f.x_c2 = oracle::urand(g, -0.8, 0.8);
    f.y_c0 = {oracle::urand(g, -0.2, 0.2)};
    f.y_c1 = {oracle::urand(g, 0.5, 1.5)};
    f.x_slope = {0.0};
    f.y_slope = {{0.0}};
    f.pad = 0.0;
    const double k = 0.1;
    auto fd_slack = [&](double t) {
      const double xp = (f.x_center(t + h) - f.x_center(t - h)) / (2 * h);
      const double yp = (f.y_c1[0] * (t + h) - f.y_c1[0] * (t - h)) / (2 * h);
      return k * std::fabs(yp) - std::fabs(xp);
    };
    auto r = detect_cu_tangent(f, k);
    if (!r) {
      // verify infeasibility on a dense grid
      for (int i = 0; i <= 50; ++i) CHECK(fd_slack(i / 50.0) < 1e-9);
      continue;
    }
    ++found;
    CHECK(r->t >= 0.0);
    CHECK(r->t <= 1.0);
    CHECK(fd_slack(r->t) >= -1e-8);
    CHECK(r->slack == doctest::Approx(fd_slack(r->t)).epsilon(1e-6).scale(1.0));
    // the detected parameter minimises the centre speed on the feasible set
    for (int i = 0; i <= 100; ++i) {
      const double t = i / 100.0;
      if (fd_slack(t) >= 0.0)
        CHECK(std::fabs(f.dx_center(t)) >= std::fabs(f.dx_center(r->t)) - 1e-8);
    }
  }
  CHECK(found > 100);  // the sweep really exercises both branches
}

TEST_CASE("disc y values follow the stored affine core") {
  SsDisc d = disc(0.1, 0.02, 0.0);
  d.y0 = {0.25};
  d.y_slope = {{0.5}};
  auto y = d.y_at({0.4});
  REQUIRE(y.size() == 1);
  CHECK(y[0] == doctest::Approx(0.25 + 0.5 * 0.4));
  CHECK(d.x_at({0.4}) == doctest::Approx(0.1 + 0.02 * 0.4));
}
