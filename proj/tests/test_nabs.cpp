#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "blenderlab/covering.hpp"
#include "blenderlab/crossmap.hpp"
#include "blenderlab/jsonio.hpp"
#include "blenderlab/nabs.hpp"
#include "oracles.hpp"

using namespace blender;

namespace {

GridPlan plan45() { return *plan_grid(0.045, 0.9, 1); }

const Certificate* find_cert(const CertBundle& b, const std::string& prop) {
  for (const auto& c : b.certs) {
    if (c.property == prop) return &c;
  }
  for (const auto& c : b.construction) {
    if (c.property == prop) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("grid planning at the reference parameters") {
  auto p = plan_grid(0.045, 0.9, 1);
  REQUIRE(p.ok());
  CHECK(p->N == 41);
  CHECK(p->m == 5);
  CHECK(p->x_C == 0.9 * 9.0 / 41.0);
  CHECK(p->x_C / p->x_B == doctest::Approx(9.0 / 41.0).epsilon(1e-15));
  CHECK(p->D == 2.0 * 0.9 / 41.0);
  CHECK(p->delta_cap ==
        doctest::Approx((0.045 * (0.9 + p->x_C) - p->D) / 7.0).epsilon(1e-15));
  CHECK(p->delta_cap == doctest::Approx(7.8397e-4).epsilon(1e-4));
  CHECK(p->separated_ok);
  CHECK(p->arity_required == 103);
  CHECK(3 * p->N >= p->arity_required);

  // the spacing inequalities hold with real margin
  const double a = 0.045;
  CHECK(a * (p->x_B - p->x_C) == doctest::Approx(0.03161).epsilon(1e-4));
  CHECK(p->D == doctest::Approx(0.04390).epsilon(1e-4));
  CHECK(a * (p->x_B + p->x_C) == doctest::Approx(0.04939).epsilon(1e-4));
  CHECK(p->D - a * (p->x_B - p->x_C) > 1e-12);
  CHECK(a * (p->x_B + p->x_C) - p->D > 1e-12);

  // the rung count window around 8m+1
  CHECK(static_cast<double>(p->N) > 8.0 / (5.0 * a));
  CHECK(static_cast<double>(p->N) < 9.0 / (4.0 * a));

  // separation needs alpha below the critical ratio at m = 5
  CHECK(a < 20.5 / 184.5);

  // grid geometry
  CHECK(p->grid_point(0) == doctest::Approx(-0.9).epsilon(1e-14));
  CHECK(p->grid_point(41) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(p->slot_target(1, 0) ==
        doctest::Approx(-0.9 + p->D / 3.0).epsilon(1e-12));
  CHECK(p->slots().size() == 42u + 43u + 43u);
}

TEST_CASE("grid planning rejections and alternate parameters") {
  CHECK(!plan_grid(0.06, 0.9, 1).ok());
  CHECK(!plan_grid(0.05, 0.9, 1).ok());
  CHECK(plan_grid(0.06, 0.9, 1).error().code == "NO_ALPHA");
  CHECK(!plan_grid(0.045, 1.8, 1).ok());  // base half-width must stay in (0,1)

  auto p = plan_grid(0.01, 0.5, 1);
  REQUIRE(p.ok());
  CHECK(p->m == 20);
  CHECK(p->N == 161);
}

TEST_CASE("admissibility threshold is the reciprocal ceiling") {
  CHECK(admissibility_threshold(0.01) == 100);
  CHECK(admissibility_threshold(0.3) == 4);
  CHECK(admissibility_threshold(1.0) == 1);
  CHECK(admissibility_threshold(1.0 / 1024.0) == 1024);
}

TEST_CASE("dyadic enumeration walks levels in odd-numerator order") {
  DyadicSource d(0.045, 0.95);
  CHECK(d.value(1, 0.01).second == 0.0);
  CHECK(d.value(2, 0.01).second == -0.5);
  CHECK(d.value(3, 0.01).second == 0.5);
  CHECK(d.value(6, 0.01).second == 0.25);
  auto v = d.value(2000, 0.01);
  CHECK(v.second == 929.0 / 1024.0);  // level 10, numerator 2(2000-1024)-1023
  CHECK(v.first == 0.045 + 0.5 / (0.01 * 2000));
  CHECK(v.first == doctest::Approx(0.07).epsilon(1e-15));
}

TEST_CASE("dyadic picks respect the admissibility threshold") {
  DyadicSource d(0.045, 0.95);
  std::set<int64_t> taken;
  auto r = d.pick(0.3, 1.0 / 1024.0, taken);
  REQUIRE(r.ok());
  CHECK(r->index > 1024);
  CHECK(std::fabs(r->B - 0.3) < 0.01);
  CHECK(r->A == doctest::Approx(0.045 + r->envelope).epsilon(1e-14));
  CHECK(r->envelope == doctest::Approx(0.5 / ((1.0 / 1024.0) * r->index)));
}

TEST_CASE("index selection fills every slot of the triple-shift grid") {
  DyadicSource d(0.045, 0.95);
  auto plan = plan45();
  auto sp = select_indices(d, plan);
  REQUIRE(sp.ok());
  CHECK(sp->roles.size() == plan.slots().size());
  CHECK(sp->sigma == 0.0);  // single family needs no strip slide
  CHECK(std::fabs(sp->x_G - plan.x_G) < plan.D);
  CHECK(sp->gap_minus_slot != sp->gap_plus_slot);
  std::set<int64_t> seen;
  for (const auto& r : sp->roles) {
    CHECK(seen.insert(r.index).second);  // indices never repeat
    CHECK(std::fabs(r.B) <= 0.95);
    CHECK(r.A > 0.045);
  }
}

TEST_CASE("selection reports the binding slot when the family runs dry") {
  DyadicSource d(0.045, 0.95);
  GapFilteredSource filtered(d, 0.2, 0.3);
  auto sp = select_indices(filtered, plan45());
  REQUIRE(!sp.ok());
  CHECK(sp.error().code == "EXHAUSTED");
  const std::string& detail = sp.error().detail;
  auto pos = detail.find("worst slot x = ");
  REQUIRE(pos != std::string::npos);
  const double worst = std::stod(detail.substr(pos + 15));
  CHECK(worst > 0.2);
  CHECK(worst < 0.3);
}

TEST_CASE("targets beyond the family half-width exhaust the selection") {
  DyadicSource d(0.045, 0.95);
  auto plan = plan_grid(0.045, 0.99, 1);
  REQUIRE(plan.ok());
  auto sp = select_indices(d, *plan);
  REQUIRE(!sp.ok());
  CHECK(sp.error().code == "EXHAUSTED");
}

TEST_CASE("two hand-picked indices build a verifiable two-element partition") {
  DyadicSource d(0.045, 0.95);
  GridPlan plan = plan45();
  SpecificationPair sp;
  sp.delta = 0.01;
  sp.schedule_step = 7;
  sp.delta_tilde = 5e-4;
  sp.sigma = 0.0;
  sp.x_G = plan.x_G;
  sp.gap_minus_slot = 0;
  sp.gap_plus_slot = 1;
  for (int64_t i : {int64_t{2000}, int64_t{2001}}) {
    SpecRole r;
    r.index = i;
    auto [a, b] = d.value(i, sp.delta);
    r.A = a;
    r.B = b;
    r.envelope = 0.5 / (sp.delta * static_cast<double>(i));
    r.psi_c1 = 0.0;
    r.slot = GridSlot{0, static_cast<int>(i - 2000), plan.grid_point(0)};
    r.family = 0;
    sp.roles.push_back(r);
  }
  auto m = build_markov(plan, sp, "dyadic");
  REQUIRE(m.ok());
  CHECK(m->elements.size() == 2u);
  CHECK(m->maps.size() == 2u);
  for (const auto& mp : m->maps) {
    auto hyp = verify_hyperbolicity(*m, mp);
    REQUIRE(hyp.ok());
    CHECK(hyp->mu < 1.0);
    auto ph = verify_partial_hyperbolicity(*m, mp);
    REQUIRE(ph.ok());
    CHECK(ph->nu < 1.0);
  }

  SUBCASE("an index at the threshold is rejected") {
    sp.roles[0].index = 10;
    auto bad = build_markov(plan, sp, "dyadic");
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == "INADMISSIBLE");
    CHECK(bad.error().detail.find("index 10 at or below threshold") !=
          std::string::npos);
  }
}

TEST_CASE("twin ladders use disjoint index families") {
  Model m = builtin_nabs_dyadic(2);
  REQUIRE(m.meta != nullptr);
  CHECK(m.meta->plan.k == 2);
  CHECK(m.meta->spec.sigma == doctest::Approx(0.75 * m.meta->plan.delta_cap));
  std::set<int64_t> fam0, fam1;
  for (const auto& r : m.meta->spec.roles) {
    (r.family == 0 ? fam0 : fam1).insert(r.index);
  }
  CHECK(!fam0.empty());
  CHECK(!fam1.empty());
  for (int64_t i : fam0) CHECK(fam1.count(i) == 0);
  for (const auto& a : m.arrays) CHECK(a.maps.size() == 2u);
}

TEST_CASE("saddle-focus coefficients track the target contraction") {
  Model m = builtin_nabs_saddlefocus(1);
  REQUIRE(m.meta != nullptr);
  for (const auto& r : m.meta->spec.roles) {
    CHECK(std::fabs(r.A - 0.045) < 0.01);
  }

  SUBCASE("emitted offsets are epsilon-dense near any target") {
    SaddleFocusSource s(2.0 * 3.14159265358979323846 * 0.5 * (std::sqrt(5.0) - 1.0),
                        0.3, 1.2, 0.0, 0.045);
    std::set<int64_t> taken;
    for (int j = 0; j <= 50; ++j) {
      const double t = -0.1 + 0.004 * j;
      auto r = s.pick(t, 1.0 / 1024.0, taken);
      REQUIRE(r.ok());
      CHECK(std::fabs(r->B - t) <= 0.01);
    }
  }
}

TEST_CASE("iterated composition multiplies contraction rates") {
  DyadicSource d(0.045, 0.95);
  IteratedSource it(d, 3);
  std::set<int64_t> taken;
  auto r = it.pick(0.2, 1.0 / 256.0, taken);
  REQUIRE(r.ok());
  CHECK(r->A == doctest::Approx(0.045 * 0.045 * 0.045).epsilon(0.5));
  CHECK(r->A < 0.001);
  CHECK(std::fabs(r->B - 0.2) < 0.05);

  SUBCASE("the affine composition law matches chained evaluation") {
    Model m;
    m.name = "pair";
    BoxXYZ box;
    box.x = Interval(-1, 1);
    box.y = {Interval(-1, 1)};
    box.z = {Interval(-1, 1)};
    m.elements = {box};
    for (int i = 0; i < 2; ++i) {
      MapDef md;
      md.id = i + 1;
      md.source = 0;
      md.A = 0.5;
      md.B = (i == 0) ? -0.3 : 0.3;
      md.E = {5.0};
      md.c = {0.0};
      md.C = {0.1};
      md.zeta = {0.0};
      m.maps.push_back(md);
    }
    m.bcg.x_B = 0.9;
    Point3 p;
    p.x = 0.1;
    p.y = {0.0};
    p.z = {0.0};
    auto r1 = eval_forward(m, 1, p, 0);
    REQUIRE(r1.ok());
    auto r2 = eval_forward(m, 2, *r1, 0);
    REQUIRE(r2.ok());
    const double composedA = 0.5 * 0.5;
    const double composedB = 0.3 + 0.5 * (-0.3);
    CHECK(r2->x ==
          doctest::Approx(composedA * 0.1 + composedB).epsilon(1e-10));
  }
}

TEST_CASE("single-shift grids lose the strengthened covering but keep arrays") {
  GridPlan plan = plan45();
  plan.shift_copies = 1;
  DyadicSource d(0.045, 0.95);
  auto sp = select_indices(d, plan);
  REQUIRE(sp.ok());
  auto m = build_markov(plan, *sp, "dyadic");
  REQUIRE(m.ok());
  CertBundle b = certify_model(*m, true);
  const Certificate* a1 = find_cert(b, "A1");
  const Certificate* a3s = find_cert(b, "A3S");
  const Certificate* arr = find_cert(b, "ARRAYED");
  REQUIRE(a1 != nullptr);
  REQUIRE(a3s != nullptr);
  REQUIRE(arr != nullptr);
  CHECK(a1->pass);
  CHECK(!a3s->pass);
  CHECK(arr->pass);
  CHECK(!b.all_pass);
}

TEST_CASE("construction checks certify the built ladder") {
  Model m = builtin_nabs_dyadic(1);
  auto cx = make_cover_context(m);
  REQUIRE(cx.ok());
  auto checks = construction_checks(m, cx->budgets);
  REQUIRE(!checks.empty());
  for (const auto& c : checks) {
    CAPTURE(c.property);
    CHECK(c.pass);
    CHECK(c.margins.at("psi_budget") > 0.0);
  }
}

TEST_CASE("specification serialization round-trips byte for byte") {
  Model m = builtin_nabs_dyadic(1);
  REQUIRE(m.meta != nullptr);
  const std::string j1 = spec_json(*m.meta).dump(2);
  auto meta2 = spec_from_json_text(j1);
  REQUIRE(meta2.ok());
  const std::string j2 = spec_json(*meta2).dump(2);
  CHECK(j1 == j2);
}
