#include "doctest.h"

#include <cmath>
#include <limits>

#include "blenderlab/interval.hpp"
#include "oracles.hpp"

using blender::Interval;

TEST_CASE("point and width basics") {
  Interval a(-0.25, 0.75);
  CHECK(a.mid() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(a.width() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a.rad() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.mag() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(a.mig() == 0.0);  // straddles zero
  Interval b(0.5, 2.0);
  CHECK(b.mig() == doctest::Approx(0.5));
  CHECK(b.mag() == doctest::Approx(2.0));
  CHECK(Interval::point(0.3).width() == 0.0);
  CHECK(a.contains(0.75));
  CHECK(!a.strictly_contains(0.75));
  CHECK(a.strictly_contains(0.7499));
}

TEST_CASE("enclosure relations and edge ties") {
  Interval out(-1.0, 1.0), in(-0.5, 0.5);
  CHECK(out.encloses(in));
  CHECK(out.strictly_encloses(in));
  CHECK(out.encloses(out));
  CHECK(!out.strictly_encloses(out));
  CHECK(out.encloses(Interval(-1.0, 0.0)));
  CHECK(!out.strictly_encloses(Interval(-1.0, 0.0)));  // shared endpoint
  CHECK(Interval(-1, 0).intersects(Interval(0, 1)));
  CHECK(!Interval(-1, -0.1).intersects(Interval(0.1, 1)));
  CHECK(Interval(-0.1, 0.1).straddles_zero());
  CHECK(!Interval(0.0, 0.1).straddles_zero());
}

TEST_CASE("directed rounding steps") {
  const double x = 0.1;
  CHECK(blender::next_up(x) > x);
  CHECK(blender::next_down(x) < x);
  CHECK(blender::next_up(blender::next_down(x)) == x);
  // outward strictly widens a finite interval
  Interval a(0.1, 0.2);
  Interval w = blender::outward(a);
  CHECK(w.lo < a.lo);
  CHECK(w.hi > a.hi);
  CHECK(w.width() < a.width() * (1.0 + 1e-12));
}

TEST_CASE("arithmetic encloses sampled results") {
  auto g = oracle::seeded(11);
  for (int trial = 0; trial < 1000; ++trial) {
    double a1 = oracle::urand(g, -3, 3), a2 = oracle::urand(g, -3, 3);
    double b1 = oracle::urand(g, -3, 3), b2 = oracle::urand(g, -3, 3);
    Interval a(std::min(a1, a2), std::max(a1, a2));
    Interval b(std::min(b1, b2), std::max(b1, b2));
    double x = oracle::urand(g, a.lo, a.hi);
    double y = oracle::urand(g, b.lo, b.hi);
    CHECK((a + b).contains(x + y));
    CHECK((a - b).contains(x - y));
    CHECK((a * b).contains(x * y));
    if (!b.straddles_zero() && b.mig() > 1e-6) {
      CHECK((a / b).contains(x / y));
    }
  }
}

TEST_CASE("division rejects only zero-straddling denominators") {
  Interval n(1.0, 2.0);
  Interval d(0.5, 4.0);
  Interval q = n / d;
  CHECK(q.contains(1.0 / 0.5));
  CHECK(q.contains(2.0 / 0.5));
  CHECK(q.contains(1.0 / 4.0));
  Interval dn(-4.0, -0.5);
  Interval qn = n / dn;
  CHECK(qn.hi < 0.0);
  CHECK(qn.contains(-4.0));
}

TEST_CASE("affine image matches direct evaluation") {
  auto g = oracle::seeded(12);
  for (int trial = 0; trial < 500; ++trial) {
    double l = oracle::urand(g, -2, 2), r = oracle::urand(g, -2, 2);
    Interval x(std::min(l, r), std::max(l, r));
    double a = oracle::urand(g, -3, 3), b = oracle::urand(g, -3, 3);
    Interval img = blender::affine_image(x, a, b);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      double p = x.lo + t * (x.hi - x.lo);
      CHECK(img.contains(a * p + b));
    }
  }
  // exact on representable inputs
  Interval e = blender::affine_image(Interval(-1.0, 1.0), 0.5, 0.25);
  CHECK(e.contains(-0.25));
  CHECK(e.contains(0.75));
  CHECK(e.width() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hull, intersect, gap") {
  Interval a(-1.0, 0.25), b(0.5, 2.0);
  Interval h = blender::hull(a, b);
  CHECK(h.lo == -1.0);
  CHECK(h.hi == 2.0);
  Interval meet;
  CHECK(!blender::intersect(a, b, &meet));
  CHECK(blender::gap(a, b) == doctest::Approx(0.25));
  CHECK(blender::gap(b, a) == doctest::Approx(0.25));
  Interval c(0.0, 1.0);
  CHECK(blender::intersect(a, c, &meet));
  CHECK(meet.lo == 0.0);
  CHECK(meet.hi == 0.25);
  CHECK(blender::gap(a, c) <= 0.0);
}

TEST_CASE("inflate and shrink are inverse up to rounding") {
  Interval a(-0.3, 0.7);
  Interval big = blender::inflate(a, 0.1);
  CHECK(big.lo == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(big.hi == doctest::Approx(0.8).epsilon(1e-15));
  Interval back;
  REQUIRE(blender::shrink(big, 0.1, &back));
  CHECK(back.lo == doctest::Approx(a.lo).epsilon(1e-12));
  CHECK(back.hi == doctest::Approx(a.hi).epsilon(1e-12));
  Interval tiny;
  CHECK(!blender::shrink(Interval(0.0, 0.1), 0.2, &tiny));  // would invert
}

TEST_CASE("interval ops keep machine-checkable monotonicity") {
  // widening an operand never shrinks the result
  auto g = oracle::seeded(13);
  for (int trial = 0; trial < 300; ++trial) {
    double l = oracle::urand(g, -2, 2), r = oracle::urand(g, -2, 2);
    Interval x(std::min(l, r), std::max(l, r));
    Interval wx = blender::inflate(x, 0.05);
    Interval y(oracle::urand(g, -2, 0), oracle::urand(g, 0.5, 2));
    CHECK((wx + y).encloses(x + y));
    CHECK((wx * y).encloses(x * y));
    CHECK((wx - y).encloses(x - y));
  }
}
