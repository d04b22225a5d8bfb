#include "blenderlab/covering.hpp"

#include <algorithm>
#include <cmath>

#include "blenderlab/nabs.hpp"

namespace blender {

// Conservative sensitivity of any certificate slack to a perturbation of C1
// norm 1: window paddings consume at most 8 budget units, and budget growth
// is damped by the centre contraction floor.
double psi_sensitivity(const Model& model) {
  double a_min = 1.0;
  for (const auto& m : model.maps) {
    const JacobianBounds J = jacobian_bounds(model, m);
    if (J.g1_x.mig() > 0.0) a_min = std::min(a_min, J.g1_x.mig());
  }
  return 8.0 * (1.0 + 1.0 / a_min);
}

namespace {

std::vector<Interval> shrunk_set(const std::vector<Interval>& ws, double margin) {
  std::vector<Interval> out;
  for (const auto& w : ws) {
    Interval s;
    if (shrink(w, margin, &s)) out.push_back(s);
  }
  return out;
}

bool covered_at(const std::vector<Interval>& ws, const Interval& target,
                double s) {
  std::vector<std::pair<double, double>> segs;
  for (const auto& w : ws)
    if (w.lo + s <= w.hi - s) segs.push_back({w.lo + s, w.hi - s});
  std::sort(segs.begin(), segs.end());
  double reach = target.lo;
  for (const auto& [lo, hi] : segs) {
    if (lo > reach) return false;
    reach = std::max(reach, hi);
    if (reach >= target.hi) return true;
  }
  return reach >= target.hi;
}

}  // namespace

double cover_slack(const std::vector<Interval>& windows,
                   const Interval& target) {
  const double W = std::max(target.width(), 1.0);
  double lo = -2.0 * W, hi = 2.0 * W;
  if (!covered_at(windows, target, lo)) return lo;
  if (covered_at(windows, target, hi)) return hi;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (covered_at(windows, target, mid) ? lo : hi) = mid;
  }
  return lo;
}

std::optional<double> uncovered_point(const std::vector<Interval>& windows,
                                      const Interval& target) {
  std::vector<std::pair<double, double>> segs;
  for (const auto& w : windows) segs.push_back({w.lo, w.hi});
  std::sort(segs.begin(), segs.end());
  // Report the point of the target farthest from the covered union: an
  // interior gap is witnessed at its midpoint, a gap resting on a target
  // edge at the edge itself (the whole gap width counts as depth there).
  double best = 0.0, best_depth = -1.0;
  auto record = [&](double lo, double hi, bool left_edge, bool right_edge) {
    if (hi <= lo) return;
    double point, depth;
    if (left_edge && right_edge) {
      point = 0.5 * (lo + hi);
      depth = hi - lo;
    } else if (left_edge) {
      point = lo;
      depth = hi - lo;
    } else if (right_edge) {
      point = hi;
      depth = hi - lo;
    } else {
      point = 0.5 * (lo + hi);
      depth = 0.5 * (hi - lo);
    }
    if (depth > best_depth) {
      best_depth = depth;
      best = point;
    }
  };
  double reach = target.lo;
  for (const auto& [lo, hi] : segs) {
    if (lo > reach && reach < target.hi) {
      const double ghi = std::min(lo, target.hi);
      record(reach, ghi, reach == target.lo, ghi >= target.hi);
    }
    reach = std::max(reach, hi);
  }
  if (reach < target.hi) record(reach, target.hi, reach == target.lo, true);
  if (best_depth < 0.0) return std::nullopt;
  return best;
}

Expected<std::vector<StripWindow>> strip_windows(const Model& model,
                                                 const DeviationBudget& b) {
  const double x_B = model.bcg.x_B, x_C = model.bcg.x_C, x_G = model.bcg.x_G;
  if (x_B <= 0.0) return Error{"EMPTY_WINDOW", "base half-width not set"};
  std::vector<StripWindow> out;
  for (const auto& m : model.maps) {
    StripWindow w;
    w.map_id = m.id;
    w.alpha = std::fabs(m.A);
    w.B = m.B;
    w.delta = b.delta_map[static_cast<size_t>(m.id)];
    w.flip = m.A < 0.0;
    w.image = affine_image(Interval(-x_B, x_B), m.A, m.B);
    if (!shrink(w.image, 3.0 * w.delta, &w.base))
      return Error{"EMPTY_WINDOW", "base window of map " +
                                       std::to_string(m.id) + " is empty"};
    w.bnd_left = inflate(Interval::point(w.image.lo), 3.0 * w.delta);
    w.bnd_right = inflate(Interval::point(w.image.hi), 3.0 * w.delta);
    if (x_C > 0.0) {
      const Interval imc = affine_image(Interval(-x_C, x_C), m.A, m.B);
      w.has_center = shrink(imc, 3.0 * w.delta, &w.center);
      w.center_safe = w.has_center && w.center.width() > 2.0 * w.delta;
    }
    if (x_G > 0.0) {
      w.gap_left = inflate(Interval::point(m.B - w.alpha * x_G), 7.0 * w.delta);
      w.gap_right = inflate(Interval::point(m.B + w.alpha * x_G), 7.0 * w.delta);
      w.has_gaps = true;
    }
    out.push_back(w);
  }
  return out;
}

Expected<CoverContext> make_cover_context(const Model& model) {
  auto cones = cone_constants_for(model);
  if (!cones.ok()) return cones.error();
  CoverContext cx;
  cx.model = &model;
  cx.cones = *cones;
  cx.budgets = budgets_for(model, *cones);
  auto ws = strip_windows(model, cx.budgets);
  if (!ws.ok()) return ws.error();
  cx.windows = *ws;
  return cx;
}

namespace {

void finish(Certificate* c, const Model& model, double slack) {
  c->pass = slack > 0.0;
  c->margins["psi_budget"] = slack / psi_sensitivity(model);
}

Interval common_base(const CoverContext& cx, const ArrayDef& a, bool* ok) {
  Interval acc;
  bool first = true;
  for (int id : a.maps) {
    const auto& w = cx.windows[static_cast<size_t>(cx.model->map_index(id))];
    if (first) {
      acc = w.base;
      first = false;
    } else if (!intersect(acc, w.base, &acc)) {
      *ok = false;
      return acc;
    }
  }
  *ok = !first;
  return acc;
}

Interval common_center(const CoverContext& cx, const ArrayDef& a, bool* ok) {
  Interval acc;
  bool first = true;
  for (int id : a.maps) {
    const auto& w = cx.windows[static_cast<size_t>(cx.model->map_index(id))];
    if (!w.has_center) {
      *ok = false;
      return acc;
    }
    if (first) {
      acc = w.center;
      first = false;
    } else if (!intersect(acc, w.center, &acc)) {
      *ok = false;
      return acc;
    }
  }
  *ok = !first;
  return acc;
}

double depth_in(const Interval& outer, const Interval& inner) {
  return std::min(inner.lo - outer.lo, outer.hi - inner.hi);
}

}  // namespace

Certificate check_A1(const CoverContext& cx) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = "A1";
  const Interval target(-model.bcg.x_B, model.bcg.x_B);
  double slack = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    std::vector<Interval> ws;
    for (const auto& w : cx.windows) ws.push_back(w.base);
    ws = shrunk_set(ws, dss);
    const double s = cover_slack(ws, target);
    if (s < slack) {
      slack = s;
      if (s <= 0.0) {
        auto pt = uncovered_point(ws, target);
        c.witness = {static_cast<int>(e), pt ? *pt : target.lo};
      }
    }
  }
  c.margins["cover_slack"] = slack;
  finish(&c, model, slack);
  return c;
}

Certificate check_A2(const CoverContext& cx) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = "A2";
  if (model.bcg.x_C <= 0.0) {
    c.pass = false;
    c.note = "no centre structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const Interval reachable(-model.bcg.x_B, model.bcg.x_B);
  double worst = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    for (const auto& w1 : cx.windows) {
      for (int side = 0; side < 2; ++side) {
        const Interval& bnd = side ? w1.bnd_right : w1.bnd_left;
        Interval clip;
        if (!intersect(bnd, reachable, &clip)) continue;  // unreachable side
        const Interval ball = inflate(clip, 2.0 * dss);
        double best = -1e300;
        for (const auto& w2 : cx.windows) {
          if (w2.map_id == w1.map_id || !w2.has_center) continue;
          const double depth = depth_in(w2.center, ball);
          if (!w1.has_center) continue;
          const double sep = gap(w2.center, w1.center) - dss;
          best = std::max(best, std::min(depth, sep));
        }
        if (best < worst) {
          worst = best;
          if (best <= 0.0) c.witness = {w1.map_id, clip.mid()};
        }
      }
    }
  }
  if (worst > 1e299) worst = -1.0;  // nothing to check means no witnesses
  c.margins["center_depth"] = worst;
  c.margins["separation"] = worst;
  finish(&c, model, worst);
  return c;
}

Certificate check_A3(const CoverContext& cx, bool strengthened) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = strengthened ? "A3S" : "A3";
  if (model.bcg.x_C <= 0.0) {
    c.pass = false;
    c.note = "no centre structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const double half = strengthened ? model.bcg.x_B : model.bcg.x_C;
  const Interval target(-half, half);
  double slack = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    std::vector<Interval> ws;
    for (const auto& w : cx.windows)
      if (w.has_center) ws.push_back(w.center);
    ws = shrunk_set(ws, 2.0 * dss);
    const double s = cover_slack(ws, target);
    if (s < slack) {
      slack = s;
      if (s <= 0.0) {
        auto pt = uncovered_point(ws, target);
        c.witness = {static_cast<int>(e), pt ? *pt : target.lo};
      }
    }
  }
  c.margins["cover_slack"] = slack;
  finish(&c, model, slack);
  return c;
}

Certificate check_B1(const CoverContext& cx) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = "B1";
  if (model.arrays.empty()) {
    c.pass = false;
    c.note = "no arrays";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const Interval target(-model.bcg.x_B, model.bcg.x_B);
  double slack = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    std::vector<Interval> ws;
    for (const auto& a : model.arrays) {
      bool ok = true;
      const Interval cb = common_base(cx, a, &ok);
      if (ok) ws.push_back(cb);
    }
    ws = shrunk_set(ws, dss);
    const double s = cover_slack(ws, target);
    if (s < slack) {
      slack = s;
      if (s <= 0.0) {
        auto pt = uncovered_point(ws, target);
        c.witness = {static_cast<int>(e), pt ? *pt : target.lo};
      }
    }
  }
  c.margins["cover_slack"] = slack;
  finish(&c, model, slack);
  return c;
}

Certificate check_B2(const CoverContext& cx, bool mirrored) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = mirrored ? "B2'" : "B2";
  if (model.arrays.empty() || model.bcg.x_G <= 0.0) {
    c.pass = false;
    c.note = "no arrays or no gap structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const Interval reachable(-model.bcg.x_B, model.bcg.x_B);
  double worst = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    for (size_t ai = 0; ai < model.arrays.size(); ++ai) {
      const ArrayDef& a1 = model.arrays[ai];
      for (int id1 : a1.maps) {
        const auto& w1 = cx.windows[static_cast<size_t>(cx.model->map_index(id1))];
        const Interval& bnd = mirrored ? w1.bnd_left : w1.bnd_right;
        Interval clip;
        if (!intersect(bnd, reachable, &clip)) continue;
        const Interval ball = inflate(clip, 2.0 * dss);
        double best = -1e300;
        for (size_t aj = 0; aj < model.arrays.size(); ++aj) {
          if (aj == ai) continue;
          bool ok = true;
          const Interval cc = common_center(cx, model.arrays[aj], &ok);
          if (!ok) continue;
          double m = depth_in(cc, ball);
          for (int id2 : model.arrays[aj].maps) {
            const auto& w2 = cx.windows[static_cast<size_t>(cx.model->map_index(id2))];
            for (int id1b : a1.maps) {
              const auto& w1b = cx.windows[static_cast<size_t>(cx.model->map_index(id1b))];
              const Interval& g = mirrored ? w1b.gap_right : w1b.gap_left;
              m = std::min(m, gap(w2.base, g) - dss);
            }
          }
          best = std::max(best, m);
        }
        if (best < worst) {
          worst = best;
          if (best <= 0.0) c.witness = {id1, clip.mid()};
        }
      }
    }
  }
  if (worst > 1e299) worst = -1.0;
  c.margins["cover_and_sep"] = worst;
  finish(&c, model, worst);
  return c;
}

Certificate check_B3(const CoverContext& cx, bool mirrored) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = mirrored ? "B3'" : "B3";
  if (model.arrays.empty() || model.bcg.x_G <= 0.0 || model.bcg.x_C <= 0.0) {
    c.pass = false;
    c.note = "missing arrays, centre or gap structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const double corner = mirrored ? model.bcg.x_C : -model.bcg.x_C;
  const double gx = mirrored ? model.bcg.x_G : -model.bcg.x_G;
  const Interval pi_gap =
      inflate(Interval::point(gx), 3.0 * cx.budgets.delta_tilde);
  double worst = 1e300;
  for (size_t e = 0; e < model.elements.size(); ++e) {
    const double dss = cx.budgets.delta_ss[e];
    const Interval ball = inflate(Interval::point(corner), 2.0 * dss);
    double best = -1e300;
    for (const auto& a : model.arrays) {
      bool ok = true;
      const Interval cc = common_center(cx, a, &ok);
      if (!ok) continue;
      double m = depth_in(cc, ball);
      for (int id : a.maps) {
        const auto& w = cx.windows[static_cast<size_t>(cx.model->map_index(id))];
        m = std::min(m, gap(w.base, pi_gap) - dss);
      }
      best = std::max(best, m);
    }
    if (best < worst) {
      worst = best;
      if (best <= 0.0) c.witness = {static_cast<int>(e), corner};
    }
  }
  c.margins["cover_and_sep"] = worst;
  finish(&c, model, worst);
  return c;
}

Certificate check_B4(const CoverContext& cx) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = "B4";
  if (model.bcg.x_G <= 0.0 || model.bcg.x_C <= 0.0) {
    c.pass = false;
    c.note = "missing centre or gap structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const double dss = cx.budgets.max_delta_ss();
  const double dt = cx.budgets.delta_tilde;
  const Interval pi_c(-model.bcg.x_C, model.bcg.x_C);
  const Interval pi_l = inflate(Interval::point(-model.bcg.x_G), 3.0 * dt);
  const Interval pi_r = inflate(Interval::point(model.bcg.x_G), 3.0 * dt);
  double worst = std::min(gap(pi_l, pi_c) - dss, gap(pi_r, pi_c) - dss);
  if (worst <= 0.0) c.witness = {-1, model.bcg.x_G};
  for (const auto& w : cx.windows) {
    if (!w.has_gaps) continue;
    double m = 1e300;
    if (w.has_center) {
      m = std::min(m, gap(w.gap_left, w.center) - dss);
      m = std::min(m, gap(w.gap_right, w.center) - dss);
    }
    m = std::min(m, gap(w.gap_left, w.bnd_left) - dss);
    m = std::min(m, gap(w.gap_right, w.bnd_right) - dss);
    if (m < worst) {
      worst = m;
      if (m <= 0.0) c.witness = {w.map_id, w.B};
    }
  }
  c.margins["gap_separation"] = worst;
  finish(&c, model, worst);
  return c;
}

Certificate check_separated(const CoverContext& cx) {
  const Model& model = *cx.model;
  Certificate c;
  c.property = "SEPARATED";
  if (model.bcg.x_G <= 0.0) {
    c.pass = false;
    c.note = "no gap structure";
    c.margins["psi_budget"] = 0.0;
    return c;
  }
  const Certificate a2 = check_A2(cx);
  const double dss = cx.budgets.max_delta_ss();
  const double dt = cx.budgets.delta_tilde;
  const Interval base(-model.bcg.x_B, model.bcg.x_B);
  const Interval pi_c(-model.bcg.x_C, model.bcg.x_C);
  double worst = a2.margins.count("center_depth")
                     ? a2.margins.at("center_depth")
                     : -1.0;
  for (double sgn : {-1.0, 1.0}) {
    const Interval pi = inflate(Interval::point(sgn * model.bcg.x_G), 3.0 * dt);
    worst = std::min(worst, depth_in(base, pi));
    if (model.bcg.x_C > 0.0) worst = std::min(worst, gap(pi, pi_c) - dss);
  }
  c.margins["combined"] = worst;
  if (!a2.pass && a2.witness) c.witness = a2.witness;
  finish(&c, model, worst);
  return c;
}

Certificate check_arrayed(const CoverContext& cx) {
  Certificate c;
  c.property = "ARRAYED";
  double worst = 1e300;
  bool pass = true;
  std::string failing;
  const Certificate parts[] = {check_B1(cx),        check_B2(cx, false),
                               check_B2(cx, true),  check_B3(cx, false),
                               check_B3(cx, true),  check_B4(cx)};
  for (const auto& p : parts) {
    pass = pass && p.pass;
    if (!p.pass) failing += (failing.empty() ? "" : ", ") + p.property;
    for (const auto& [k, v] : p.margins)
      if (k == "psi_budget") worst = std::min(worst, v);
  }
  c.pass = pass;
  c.margins["psi_budget"] = worst;
  if (!pass) c.note = "failing: " + failing;
  return c;
}

Certificate check_property(const CoverContext& cx, const std::string& prop) {
  if (prop == "A1") return check_A1(cx);
  if (prop == "A2") return check_A2(cx);
  if (prop == "A3") return check_A3(cx, false);
  if (prop == "A3S") return check_A3(cx, true);
  if (prop == "B1") return check_B1(cx);
  if (prop == "B2") return check_B2(cx, false);
  if (prop == "B2'") return check_B2(cx, true);
  if (prop == "B3") return check_B3(cx, false);
  if (prop == "B3'") return check_B3(cx, true);
  if (prop == "B4") return check_B4(cx);
  if (prop == "SEPARATED") return check_separated(cx);
  if (prop == "ARRAYED") return check_arrayed(cx);
  Certificate c;
  c.property = prop;
  c.pass = false;
  c.note = "unknown property";
  return c;
}

CertBundle certify_model(const Model& model, bool full) {
  CertBundle b;
  for (const auto& m : model.maps) {
    auto h = verify_hyperbolicity(model, m);
    if (!h.ok()) {
      b.failure = h.error();
      return b;
    }
    b.hyp.push_back({m.id, *h});
    auto p = verify_partial_hyperbolicity(model, m);
    if (!p.ok()) {
      b.failure = p.error();
      return b;
    }
    b.phyp.push_back({m.id, *p});
  }
  auto cx = make_cover_context(model);
  if (!cx.ok()) {
    b.failure = cx.error();
    return b;
  }
  b.cones = cx->cones;
  b.budgets = cx->budgets;
  std::vector<std::string> props;
  if (full) {
    props = {"A1"};
    if (model.bcg.x_C > 0.0) {
      props.push_back("A2");
      props.push_back("A3");
      props.push_back("A3S");
    }
    if (model.bcg.x_G > 0.0) props.push_back("SEPARATED");
    if (!model.arrays.empty()) {
      for (const char* p : {"B1", "B2", "B2'", "B3", "B3'", "B4", "ARRAYED"})
        props.push_back(p);
    }
  } else {
    props = model.claims;
  }
  b.all_pass = true;
  for (const auto& p : props) {
    b.certs.push_back(check_property(*cx, p));
    b.all_pass = b.all_pass && b.certs.back().pass;
  }
  if (model.meta) {
    b.construction = construction_checks(model, cx->budgets);
    for (const auto& cc : b.construction) b.all_pass = b.all_pass && cc.pass;
  }
  return b;
}

}  // namespace blender
