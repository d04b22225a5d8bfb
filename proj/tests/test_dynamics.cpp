#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "blenderlab/covering.hpp"
#include "blenderlab/crossmap.hpp"
#include "blenderlab/dynamics.hpp"
#include "blenderlab/nabs.hpp"
#include "oracles.hpp"

using namespace blender;

namespace {

const Model& affine3() {
  static Model m = builtin_affine3();
  return m;
}

const CoverContext& affine3_cx() {
  static CoverContext cx = *make_cover_context(affine3());
  return cx;
}

const Model& dyadic1() {
  static Model m = builtin_nabs_dyadic(1);
  return m;
}

const CoverContext& dyadic1_cx() {
  static CoverContext cx = *make_cover_context(dyadic1());
  return cx;
}

const Model& dyadic2() {
  static Model m = builtin_nabs_dyadic(2);
  return m;
}

const CoverContext& dyadic2_cx() {
  static CoverContext cx = *make_cover_context(dyadic2());
  return cx;
}

SsDisc flat_disc(double x0, double slope = 0.0, double pad = 0.0) {
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

TEST_CASE("disc preimage under one strip") {
  auto r = preimage_disc(affine3_cx(), 2, flat_disc(0.2));
  REQUIRE(r.ok());
  CHECK(r->x0 == doctest::Approx(0.4).epsilon(1e-12));

  SUBCASE("slopes contract by the stable-over-centre ratio") {
    auto s = preimage_disc(affine3_cx(), 2, flat_disc(0.2, 0.01));
    REQUIRE(s.ok());
    CHECK(std::fabs(s->x_slope[0]) ==
          doctest::Approx(0.01 * 0.1 / 0.5).epsilon(1e-6));
    CHECK(s->lip_x <= affine3_cx().cones.k.k_ss + 1e-12);
  }
  SUBCASE("a disc outside the base window cannot be pulled back") {
    auto bad = preimage_disc(affine3_cx(), 2, flat_disc(0.45));
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == "NOT_CROSSING");
  }
}

TEST_CASE("backward refinement onto the unstable leaf") {
  auto r = find_unstable_intersection(affine3_cx(), flat_disc(0.2), 1e-9);
  REQUIRE(r.ok());
  REQUIRE(r->coding.symbols.size() >= 3u);
  CHECK(r->coding.symbols[0] == 2);
  CHECK(r->coding.symbols[1] == 3);
  CHECK(r->coding.symbols[2] == 1);
  CHECK(r->residual <= 1e-9);
  CHECK(r->depth <= 35);
  CHECK(r->x_enclosure.width() <= 1e-9);
  CHECK(r->point.x == doctest::Approx(0.2).epsilon(1e-9));

  SUBCASE("the enclosure contains the series value of the coding") {
    const double leaf = oracle::word_leaf_x(affine3(), r->coding.symbols,
                                            r->coding.symbols.back());
    CHECK(inflate(r->x_enclosure, 1e-9).contains(leaf));
  }
  SUBCASE("the backward orbit re-evaluates forward within tolerance") {
    REQUIRE(r->orbit.size() >= 2u);
    for (size_t i = 0; i + 1 < r->orbit.size() && i < r->coding.symbols.size();
         ++i) {
      const int id = r->coding.symbols[i];
      const auto& mp = affine3().map_by_id(id);
      auto fwd = eval_forward(affine3(), id, r->orbit[i + 1], mp.source);
      REQUIRE(fwd.ok());
      CHECK(fwd->x == doctest::Approx(r->orbit[i].x).epsilon(1e-8).scale(1.0));
      // every orbit point stays inside its element box
      const auto& box = affine3().elements[0];
      CHECK(box.contains(r->orbit[i].x, r->orbit[i].y, r->orbit[i].z, 1e-9));
    }
  }
  SUBCASE("trace rows narrate the refinement") {
    REQUIRE(!r->trace.empty());
    CHECK(r->trace.front().kind == "start");
    bool saw_strip = false;
    for (const auto& row : r->trace) saw_strip |= row.kind == "strip";
    CHECK(saw_strip);
  }
}

TEST_CASE("a disc at the fixed point gets the constant coding") {
  auto r = find_unstable_intersection(affine3_cx(), flat_disc(0.0), 1e-10);
  REQUIRE(r.ok());
  for (int s : r->coding.symbols) CHECK(s == 2);
  CHECK(inflate(r->x_enclosure, 1e-12).contains(0.0));  // B/(1-A) of map 2
}

TEST_CASE("centre-window refinement stays inside centre windows") {
  auto r = find_unstable_intersection(affine3_cx(), flat_disc(0.2), 1e-9, 200,
                                      WindowMode::Center);
  REQUIRE(r.ok());
  CHECK(r->residual <= 1e-9);
  CHECK(r->x_enclosure.mag() <= 0.5 * 0.8 + 1e-6);  // inside A * centre region
}

TEST_CASE("refinement reports a dead end when preimages escape the windows") {
  Model m = builtin_toy_affine();
  auto cx = make_cover_context(m);
  REQUIRE(cx.ok());
  auto r = find_unstable_intersection(*cx, flat_disc(0.1), 1e-9);
  REQUIRE(!r.ok());
  CHECK(r.error().code == "STUCK");
  auto ok = find_unstable_intersection(*cx, flat_disc(0.0), 1e-9);
  REQUIRE(ok.ok());  // the fixed point itself survives forever
}

TEST_CASE("wide discs cross no single strip") {
  auto r = find_unstable_intersection(affine3_cx(), flat_disc(0.44, 0.0, 0.3),
                                      1e-9);
  REQUIRE(!r.ok());
  CHECK(r.error().code == "NOT_CROSSING");
}

TEST_CASE("folding families transport backward by the strip's affine inverse") {
  const CoverContext& cx = dyadic1_cx();
  auto seed = make_folding_family(cx);
  REQUIRE(seed.ok());
  auto step = reproduce_folding(cx, *seed, FoldMode::Separated);
  REQUIRE(step.ok());
  REQUIRE(!step->tangency);
  const MapDef& mp = cx.model->map_by_id(step->strip);
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double told = step->offset + step->scale * t;
    const double expect = (seed->x_center(told) - mp.B) / mp.A;
    CHECK(step->family.x_center(t) == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK(step->family.kind == seed->kind);

  SUBCASE("array-slot reproduction follows one slot of an exact array") {
    auto array_seed = make_exact_array_family(cx);
    REQUIRE(array_seed.ok());
    auto astep = reproduce_folding(cx, *array_seed, FoldMode::Arrayed);
    REQUIRE(astep.ok());
    if (!astep->tangency) {
      const MapDef& amp = cx.model->map_by_id(astep->strip);
      const double told = astep->offset + astep->scale * 0.5;
      const double expect = (array_seed->x_center(told) - amp.B) / amp.A;
      CHECK(astep->family.x_center(0.5) ==
            doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("tangency location pins the contact in a thin leaf window") {
  const CoverContext& cx = dyadic1_cx();
  auto fam = make_folding_family(cx);
  REQUIRE(fam.ok());
  auto r = locate_tangency(cx, *fam, 1e-8);
  REQUIRE(r.ok());
  CHECK(r->depth <= 60);
  CHECK(r->leaf.x_window.width() <= 1e-8);
  CHECK(r->parameter >= 0.0);
  CHECK(r->parameter <= 1.0);
  REQUIRE(!r->leaf.coding_prefix.symbols.empty());

  SUBCASE("the leaf window contains the series value of its coding") {
    const auto& syms = r->leaf.coding_prefix.symbols;
    const double leaf = oracle::word_leaf_x(dyadic1(), syms, syms.back());
    CHECK(inflate(r->leaf.x_window, 1e-7).contains(leaf));
  }
  SUBCASE("the tangency point sits on the located leaf") {
    CHECK(inflate(r->leaf.x_window, 1e-7).contains(r->point.x));
  }
}

TEST_CASE("array codings inject into nested disjoint leaf boxes") {
  const CoverContext& cx = dyadic2_cx();
  auto fam = make_exact_array_family(cx);
  REQUIRE(fam.ok());
  auto run = [&](const std::vector<int>& sym) {
    Coding c;
    c.kind = CodingKind::ArraySlot;
    c.symbols = sym;
    return coding_to_tangency(cx, *fam, c, 1e-9);
  };
  auto root = run({});
  REQUIRE(root.ok());
  const double root_width = root->x_window.width();
  CHECK(root_width > 0.0);

  std::vector<oracle::CodedBox> boxes;
  for (const auto& w : oracle::all_words(2, 0, 3)) {
    auto r = run(w);
    REQUIRE(r.ok());
    boxes.push_back({w, r->x_window});
    const size_t d = w.size();
    CHECK(r->x_window.width() <=
          root_width * std::pow(0.045, static_cast<double>(d)) * 1.05);
  }
  double min_gap = 0.0;
  CHECK(oracle::pair_rule_violations(boxes, &min_gap) == 0);

  SUBCASE("sibling separation decays exactly with the contraction rate") {
    auto a0 = run({0});
    auto a1 = run({1});
    REQUIRE(a0.ok());
    REQUIRE(a1.ok());
    const double g1 = gap(a0->x_window, a1->x_window);
    CHECK(g1 > 0.0);
    auto d0 = run({0, 0, 0});
    auto d1 = run({0, 0, 1});
    REQUIRE(d0.ok());
    REQUIRE(d1.ok());
    const double g3 = gap(d0->x_window, d1->x_window);
    CHECK(g3 >= g1 * 0.045 * 0.045 * 0.999);
    CHECK(g3 <= g1 * 0.045 * 0.045 * 1.2);
  }
  SUBCASE("each box contains the series value of its frame composition") {
    auto frame = oracle::frame_array(*cx.model);
    REQUIRE(frame.has_value());
    const auto& arr = cx.model->arrays[*frame];
    for (const auto& b : boxes) {
      std::vector<int> word;
      for (int s : b.prefix) word.push_back(arr.maps[static_cast<size_t>(s)]);
      const double leaf =
          oracle::word_leaf_x(*cx.model, word, arr.maps.front());
      CHECK(inflate(b.w, 1e-9).contains(leaf));
    }
  }
  SUBCASE("slots outside the array arity are rejected") {
    auto bad = run({5});
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == "INVARIANT_BREACH");
  }
}

TEST_CASE("prefolding families: creation, validity window, machine check") {
  const CoverContext& cx = dyadic1_cx();
  auto limit = prefold_mu_limit(cx, 2);
  REQUIRE(limit.ok());
  CHECK(*limit == doctest::Approx(3.039747247516852e-3).epsilon(1e-9));

  SUBCASE("right case at a comfortable displacement") {
    auto fam = make_prefolding(cx, PrefoldScenario::RightCase, 2, 0.3 * *limit);
    REQUIRE(fam.ok());
    PrefoldCheck pc = check_prefolding(cx, *fam);
    CHECK(pc.pass);
    CHECK(pc.markers_on_leaf);
    CHECK(pc.leaf_in_gap);
    CHECK(pc.center_hit);
    CHECK(pc.marker_residual <= 1e-7);
  }
  SUBCASE("displacements beyond the limit are refused") {
    auto bad = make_prefolding(cx, PrefoldScenario::RightCase, 2, 1.1 * *limit);
    REQUIRE(!bad.ok());
    CHECK(bad.error().code == "BAD_MU");
  }
  SUBCASE("left case ignores the displacement") {
    auto fam = make_prefolding(cx, PrefoldScenario::LeftCase, 2, 0.0);
    REQUIRE(fam.ok());
    PrefoldCheck pc = check_prefolding(cx, *fam);
    CHECK(pc.pass);
  }
  SUBCASE("no gap structure means no prefolding") {
    auto r = prefold_mu_limit(affine3_cx(), 2);
    REQUIRE(!r.ok());
    CHECK(r.error().code == "INVARIANT_BREACH");
  }
}

TEST_CASE("expanding-centre partitions route through double inversion") {
  // a centre-expanding family (coefficient 1.8) enters as the inverse image
  Model cs;
  cs.name = "cs18";
  BoxXYZ box;
  box.x = Interval(-1, 1);
  box.y = {Interval(-1, 1)};
  box.z = {Interval(-1, 1)};
  cs.elements = {box};
  for (int i = 0; i < 3; ++i) {
    MapDef m;
    m.id = i + 1;
    m.source = 0;
    m.A = 1.0 / 1.8;
    m.B = -0.6 + 0.6 * i;
    m.E = {10.0};
    m.c = {-0.6 + 0.6 * i};
    m.C = {0.1};
    m.zeta = {0.0};
    cs.maps.push_back(m);
  }
  cs.bcg.x_B = 0.9;
  cs.claims = {"A1"};
  Model cu = invert_partition(cs);
  CHECK(cu.maps[0].A == doctest::Approx(1.8).epsilon(1e-12));
  Model routed = invert_partition(cu);
  CHECK(routed.maps[0].A == doctest::Approx(1.0 / 1.8).epsilon(1e-12));
  auto cx = make_cover_context(routed);
  REQUIRE(cx.ok());
  CHECK(check_A1(*cx).pass);
  auto r = find_unstable_intersection(*cx, flat_disc(0.2), 1e-9);
  REQUIRE(r.ok());
  CHECK(r->residual <= 1e-9);
}

TEST_CASE("two strong-stable dimensions flow through the engines") {
  Model m;
  m.name = "wide-z";
  BoxXYZ box;
  box.x = Interval(-1, 1);
  box.y = {Interval(-1, 1)};
  box.z = {Interval(-1, 1), Interval(-1, 1)};
  m.elements = {box};
  for (int i = 0; i < 3; ++i) {
    MapDef d;
    d.id = i + 1;
    d.source = 0;
    d.A = 0.5;
    d.B = -0.6 + 0.6 * i;
    d.E = {10.0};
    d.c = {-0.6 + 0.6 * i};
    d.C = {0.1, 0.12};
    d.zeta = {0.0, 0.0};
    m.maps.push_back(d);
  }
  m.bcg.x_B = 0.9;
  m.dss = 2;
  auto cx = make_cover_context(m);
  REQUIRE(cx.ok());

  SsDisc d;
  d.element = 0;
  d.x0 = 0.2;
  d.x_slope = {0.01, 0.02};
  d.y0 = {0.0};
  d.y_slope = {{0.0, 0.0}};
  d.pad = 0.0;
  d.lip_x = 0.03;
  d.lip_y = 0.0;
  auto pre = preimage_disc(*cx, 2, d);
  REQUIRE(pre.ok());
  CHECK(pre->x_slope.size() == 2u);
  CHECK(pre->x0 == doctest::Approx(0.4).epsilon(1e-9));
  auto r = find_unstable_intersection(*cx, d, 1e-9);
  REQUIRE(r.ok());
  CHECK(r->coding.symbols[0] == 2);
  CHECK(r->z_enclosure.size() == 2u);
}
