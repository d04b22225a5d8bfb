#include "blenderlab/jsonio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace blender {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Schema violations unwind to the reader entry points, which turn them into
// PARSE errors naming the offending field.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw SchemaError(where + ": " + msg);
}

const ojson& need(const ojson& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing key '") + key + "'");
  return *it;
}

double num(const ojson& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double num_at(const ojson& j, const char* key, const std::string& where) {
  return num(need(j, key, where), where + "." + key);
}

double num_or(const ojson& j, const char* key, double dflt,
              const std::string& where) {
  auto it = j.find(key);
  return it == j.end() ? dflt : num(*it, where + "." + key);
}

int int_at(const ojson& j, const char* key, const std::string& where) {
  const ojson& v = need(j, key, where);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

int int_or(const ojson& j, const char* key, int dflt,
           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer())
    fail(where + "." + key, "expected an integer");
  return it->get<int>();
}

bool bool_at(const ojson& j, const char* key, const std::string& where) {
  const ojson& v = need(j, key, where);
  if (!v.is_boolean()) fail(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string str_at(const ojson& j, const char* key, const std::string& where) {
  const ojson& v = need(j, key, where);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

// Accepts {"lo": a, "hi": b} or the shorthand [a, b].
Interval iv_of(const ojson& j, const std::string& where) {
  if (j.is_array()) {
    if (j.size() != 2) fail(where, "expected [lo, hi]");
    return Interval{num(j[0], where + "[0]"), num(j[1], where + "[1]")};
  }
  if (j.is_object())
    return Interval{num_at(j, "lo", where), num_at(j, "hi", where)};
  fail(where, "expected an interval");
}

std::vector<double> num_vec(const ojson& j, size_t want,
                            const std::string& where) {
  if (!j.is_array() || j.size() != want)
    fail(where, "expected " + std::to_string(want) + " entries");
  std::vector<double> out;
  out.reserve(want);
  for (size_t i = 0; i < want; ++i)
    out.push_back(num(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Interval> iv_vec(const ojson& j, size_t want,
                             const std::string& where) {
  if (!j.is_array() || j.size() != want)
    fail(where, "expected " + std::to_string(want) + " intervals");
  std::vector<Interval> out;
  out.reserve(want);
  for (size_t i = 0; i < want; ++i)
    out.push_back(iv_of(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

ojson iv_json(const Interval& v) {
  ojson j;
  j["lo"] = v.lo;
  j["hi"] = v.hi;
  return j;
}

ojson jac_row(const std::vector<Interval>& row) {
  ojson a = ojson::array();
  for (const auto& v : row) a.push_back(iv_json(v));
  return a;
}

ojson jac_block(const std::vector<std::vector<Interval>>& block) {
  ojson a = ojson::array();
  for (const auto& row : block) a.push_back(jac_row(row));
  return a;
}

std::vector<Interval> jac_row_in(const ojson& j, size_t want,
                                 const std::string& where) {
  return iv_vec(j, want, where);
}

std::vector<std::vector<Interval>> jac_block_in(const ojson& j, size_t rows,
                                                size_t cols,
                                                const std::string& where) {
  if (!j.is_array() || j.size() != rows)
    fail(where, "expected " + std::to_string(rows) + " rows");
  std::vector<std::vector<Interval>> out;
  out.reserve(rows);
  for (size_t i = 0; i < rows; ++i)
    out.push_back(iv_vec(j[i], cols, where + "[" + std::to_string(i) + "]"));
  return out;
}

// 1-based line number of a byte offset, for parse diagnostics.
int line_of(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

Model model_of(const ojson& j) {
  if (!j.is_object()) fail("model", "expected an object");
  Model m;
  m.name = j.contains("name") ? str_at(j, "name", "model") : "model";

  const ojson& dims = need(j, "dimensions", "model");
  if (!dims.is_array() || dims.size() != 3)
    fail("model.dimensions", "expected [1, du, dss]");
  if (!dims[0].is_number_integer() || dims[0].get<int>() != 1)
    fail("model.dimensions[0]", "centre dimension must be 1");
  m.du = dims[1].get<int>();
  m.dss = dims[2].get<int>();
  if (m.du < 1 || m.dss < 1)
    fail("model.dimensions", "du and dss must be at least 1");

  const ojson& els = need(j, "elements", "model");
  if (!els.is_array() || els.empty())
    fail("model.elements", "expected a non-empty array");
  for (size_t i = 0; i < els.size(); ++i) {
    std::string where = "model.elements[" + std::to_string(i) + "]";
    const ojson& e = els[i];
    if (!e.is_object()) fail(where, "expected an object");
    BoxXYZ box;
    box.x = iv_of(need(e, "x", where), where + ".x");
    box.y = iv_vec(need(e, "y", where), m.du, where + ".y");
    box.z = iv_vec(need(e, "z", where), m.dss, where + ".z");
    m.elements.push_back(box);
  }

  const ojson& maps = need(j, "maps", "model");
  if (!maps.is_array() || maps.empty())
    fail("model.maps", "expected a non-empty array");
  for (size_t i = 0; i < maps.size(); ++i) {
    std::string where = "model.maps[" + std::to_string(i) + "]";
    const ojson& mj = maps[i];
    if (!mj.is_object()) fail(where, "expected an object");
    MapDef d;
    d.id = int_at(mj, "id", where);
    if (d.id <= 0) fail(where + ".id", "ids are positive");
    for (const auto& prev : m.maps)
      if (prev.id == d.id) fail(where + ".id", "duplicate map id");
    d.source = int_at(mj, "source", where);
    if (d.source < 0 || d.source >= static_cast<int>(m.elements.size()))
      fail(where + ".source", "element index out of range");
    d.A = num_at(mj, "A", where);
    d.B = num_at(mj, "B", where);
    d.E = num_vec(need(mj, "E", where), m.du, where + ".E");
    d.c = num_vec(need(mj, "c", where), m.du, where + ".c");
    d.C = num_vec(need(mj, "C", where), m.dss, where + ".C");
    d.zeta = num_vec(need(mj, "zeta", where), m.dss, where + ".zeta");
    for (double e : d.E)
      if (e == 0.0) fail(where + ".E", "entries must be nonzero");
    if (mj.contains("psi")) {
      const ojson& ps = mj["psi"];
      if (!ps.is_array()) fail(where + ".psi", "expected an array");
      for (size_t t = 0; t < ps.size(); ++t) {
        std::string pw = where + ".psi[" + std::to_string(t) + "]";
        PsiTerm term;
        term.family = str_at(ps[t], "family", pw);
        if (term.family != "sin_x" && term.family != "sin_xy" &&
            term.family != "sin_xz")
          fail(pw + ".family", "unknown family '" + term.family + "'");
        term.component = int_at(ps[t], "component", pw);
        if (term.component < 1 || term.component > 3)
          fail(pw + ".component", "must be 1, 2, or 3");
        term.amplitude = num_at(ps[t], "amplitude", pw);
        d.psi.push_back(term);
      }
    }
    if (mj.contains("declared")) {
      const ojson& dj = mj["declared"];
      std::string dw = where + ".declared";
      if (!dj.is_object()) fail(dw, "expected an object");
      JacobianBounds b;
      b.g1_x = iv_of(need(dj, "g1_x", dw), dw + ".g1_x");
      b.g1_y = jac_row_in(need(dj, "g1_y", dw), m.du, dw + ".g1_y");
      b.g1_z = jac_row_in(need(dj, "g1_z", dw), m.dss, dw + ".g1_z");
      b.g2_x = jac_row_in(need(dj, "g2_x", dw), m.du, dw + ".g2_x");
      b.g2_y = jac_block_in(need(dj, "g2_y", dw), m.du, m.du, dw + ".g2_y");
      b.g2_z = jac_block_in(need(dj, "g2_z", dw), m.du, m.dss, dw + ".g2_z");
      b.g3_x = jac_row_in(need(dj, "g3_x", dw), m.dss, dw + ".g3_x");
      b.g3_y = jac_block_in(need(dj, "g3_y", dw), m.dss, m.du, dw + ".g3_y");
      b.g3_z = jac_block_in(need(dj, "g3_z", dw), m.dss, m.dss, dw + ".g3_z");
      d.declared = b;
    }
    m.maps.push_back(std::move(d));
  }

  if (j.contains("structure")) {
    const ojson& s = j["structure"];
    m.bcg.x_B = num_at(s, "x_B", "model.structure");
    m.bcg.x_C = num_or(s, "x_C", 0.0, "model.structure");
    m.bcg.x_G = num_or(s, "x_G", 0.0, "model.structure");
  } else {
    fail("model", "missing key 'structure'");
  }
  if (m.bcg.x_B <= 0.0) fail("model.structure.x_B", "must be positive");

  if (j.contains("claims")) {
    const ojson& c = j["claims"];
    if (!c.is_array()) fail("model.claims", "expected an array");
    for (size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_string())
        fail("model.claims[" + std::to_string(i) + "]", "expected a string");
      m.claims.push_back(c[i].get<std::string>());
    }
  }

  if (j.contains("arrays")) {
    const ojson& as = j["arrays"];
    if (!as.is_array()) fail("model.arrays", "expected an array");
    for (size_t i = 0; i < as.size(); ++i) {
      std::string where = "model.arrays[" + std::to_string(i) + "]";
      const ojson& aj = as[i];
      ArrayDef a;
      const ojson& ids = need(aj, "maps", where);
      if (!ids.is_array() || ids.empty())
        fail(where + ".maps", "expected a non-empty array");
      for (size_t t = 0; t < ids.size(); ++t) {
        int id = ids[t].get<int>();
        bool known = false;
        for (const auto& d : m.maps) known = known || d.id == id;
        if (!known) fail(where + ".maps", "unknown map id");
        a.maps.push_back(id);
      }
      a.slot_target = num_or(aj, "slot_target", 0.0, where);
      a.copy = int_or(aj, "copy", 0, where);
      a.slot = int_or(aj, "slot", 0, where);
      m.arrays.push_back(std::move(a));
    }
  }

  m.cone_floor = num_or(j, "cone_floor", 0.05, "model");
  m.budget_floor = num_or(j, "budget_floor", 0.0, "model");
  m.gap_minus_map = int_or(j, "gap_minus_map", -1, "model");
  m.gap_plus_map = int_or(j, "gap_plus_map", -1, "model");
  return m;
}

SpecMeta spec_of(const ojson& j) {
  if (!j.is_object()) fail("spec", "expected an object");
  SpecMeta meta;
  GridPlan& p = meta.plan;
  SpecificationPair& s = meta.spec;

  p.alpha = num_at(j, "alpha", "spec");
  p.x_B = num_at(j, "x_B", "spec");
  p.m = int_at(j, "m", "spec");
  p.N = int_at(j, "N", "spec");
  p.x_C = num_at(j, "x_C", "spec");
  s.x_G = num_at(j, "x_G", "spec");
  p.k = int_at(j, "k", "spec");
  p.shift_copies = int_at(j, "shifts", "spec");
  s.delta = num_at(j, "delta", "spec");

  const ojson& b = need(j, "budgets", "spec");
  p.D = num_at(b, "D", "spec.budgets");
  p.delta_cap = num_at(b, "delta_cap", "spec.budgets");
  s.delta_tilde = num_at(b, "delta_tilde", "spec.budgets");
  s.sigma = num_at(b, "sigma", "spec.budgets");
  s.schedule_step = int_at(b, "schedule_step", "spec.budgets");
  p.x_G = num_at(b, "x_G_plan", "spec.budgets");
  s.gap_minus_slot = int_at(b, "gap_minus_slot", "spec.budgets");
  s.gap_plus_slot = int_at(b, "gap_plus_slot", "spec.budgets");
  p.arity_required = int_at(b, "arity", "spec.budgets");
  p.separated_ok = bool_at(b, "separated", "spec.budgets");
  meta.source = str_at(b, "source", "spec.budgets");

  const ojson& idx = need(j, "indices", "spec");
  if (!idx.is_array()) fail("spec.indices", "expected an array");
  for (size_t i = 0; i < idx.size(); ++i) {
    std::string where = "spec.indices[" + std::to_string(i) + "]";
    const ojson& e = idx[i];
    if (!e.is_object()) fail(where, "expected an object");
    SpecRole r;
    const ojson& iv = need(e, "i", where);
    if (!iv.is_number_integer()) fail(where + ".i", "expected an integer");
    r.index = iv.get<int64_t>();
    r.slot.n = int_at(e, "grid_point", where);
    r.slot.copy = int_at(e, "copy", where);
    r.slot.target = p.slot_target(r.slot.copy, r.slot.n);
    r.family = int_at(e, "family", where);
    r.A = num_at(e, "A", where);
    r.B = num_at(e, "B", where);
    r.envelope = num_at(e, "envelope", where);
    r.psi_c1 = num_at(e, "psi", where);
    s.roles.push_back(r);
  }
  return meta;
}

}  // namespace

ojson interval_json(const Interval& v) { return iv_json(v); }

ojson point_json(const Point3& p) {
  ojson j;
  j["x"] = p.x;
  j["y"] = p.y;
  j["z"] = p.z;
  return j;
}

ojson certificate_json(const Certificate& c) {
  ojson j;
  j["property"] = c.property;
  j["verdict"] = c.pass ? "PASS" : "FAIL";
  ojson mg = ojson::object();
  for (const auto& [name, value] : c.margins) mg[name] = value;
  j["margins"] = mg;
  if (c.witness) {
    ojson w;
    w["element"] = c.witness->first;
    w["x"] = c.witness->second;
    j["witness"] = w;
  }
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

ojson bundle_json(const std::string& model_name, const CertBundle& b) {
  ojson j;
  j["model"] = model_name;
  j["all_pass"] = b.all_pass;
  if (b.failure) {
    ojson f;
    f["code"] = b.failure->code;
    f["detail"] = b.failure->detail;
    j["failure"] = f;
  }
  ojson hyp = ojson::array();
  for (const auto& [id, r] : b.hyp) {
    ojson h;
    h["map"] = id;
    h["mu"] = r.mu;
    h["margin"] = r.margin;
    hyp.push_back(h);
  }
  j["hyperbolicity"] = hyp;
  ojson phyp = ojson::array();
  for (const auto& [id, r] : b.phyp) {
    ojson h;
    h["map"] = id;
    h["center_dx"] = iv_json(r.center_dx);
    h["nu"] = r.nu;
    h["margin"] = r.margin;
    phyp.push_back(h);
  }
  j["partial_hyperbolicity"] = phyp;
  ojson cones;
  cones["k_u"] = b.cones.k.k_u;
  cones["k_s"] = b.cones.k.k_s;
  cones["k_ss"] = b.cones.k.k_ss;
  cones["expansion"] = b.cones.expansion;
  cones["contraction"] = b.cones.contraction;
  cones["u_gap"] = b.cones.u_gap;
  cones["s_gap"] = b.cones.s_gap;
  cones["ss_gap"] = b.cones.ss_gap;
  j["cones"] = cones;
  ojson bud;
  bud["delta_ss"] = b.budgets.delta_ss;
  bud["delta_u"] = b.budgets.delta_u;
  bud["delta_tilde"] = b.budgets.delta_tilde;
  bud["max_delta_ss"] = b.budgets.max_delta_ss();
  bud["max_delta"] = b.budgets.max_delta();
  j["budgets"] = bud;
  ojson certs = ojson::array();
  for (const auto& c : b.certs) certs.push_back(certificate_json(c));
  for (const auto& c : b.construction) certs.push_back(certificate_json(c));
  j["certificates"] = certs;
  return j;
}

ojson plan_json(const GridPlan& p) {
  ojson j;
  j["alpha"] = p.alpha;
  j["x_B"] = p.x_B;
  j["m"] = p.m;
  j["N"] = p.N;
  j["x_C"] = p.x_C;
  j["x_G"] = p.x_G;
  j["D"] = p.D;
  j["k"] = p.k;
  j["shifts"] = p.shift_copies;
  j["separated"] = p.separated_ok;
  j["arity"] = p.arity_required;
  j["delta_cap"] = p.delta_cap;
  return j;
}

ojson spec_json(const SpecMeta& meta) {
  const GridPlan& p = meta.plan;
  const SpecificationPair& s = meta.spec;
  ojson j;
  j["alpha"] = p.alpha;
  j["x_B"] = p.x_B;
  j["m"] = p.m;
  j["N"] = p.N;
  j["x_C"] = p.x_C;
  j["x_G"] = s.x_G;
  j["k"] = p.k;
  j["shifts"] = p.shift_copies;
  ojson idx = ojson::array();
  for (const auto& r : s.roles) {
    ojson e;
    e["i"] = r.index;
    e["grid_point"] = r.slot.n;
    e["copy"] = r.slot.copy;
    e["family"] = r.family;
    e["A"] = r.A;
    e["B"] = r.B;
    e["envelope"] = r.envelope;
    e["psi"] = r.psi_c1;
    idx.push_back(e);
  }
  j["indices"] = idx;
  j["delta"] = s.delta;
  ojson b;
  b["D"] = p.D;
  b["delta_cap"] = p.delta_cap;
  b["delta_tilde"] = s.delta_tilde;
  b["sigma"] = s.sigma;
  b["schedule_step"] = s.schedule_step;
  b["x_G_plan"] = p.x_G;
  b["gap_minus_slot"] = s.gap_minus_slot;
  b["gap_plus_slot"] = s.gap_plus_slot;
  b["arity"] = p.arity_required;
  b["separated"] = p.separated_ok;
  b["source"] = meta.source;
  j["budgets"] = b;
  return j;
}

ojson model_json(const Model& m) {
  ojson j;
  j["name"] = m.name;
  j["dimensions"] = ojson::array({1, m.du, m.dss});
  ojson els = ojson::array();
  for (const auto& e : m.elements) {
    ojson ej;
    ej["x"] = iv_json(e.x);
    ej["y"] = jac_row(e.y);
    ej["z"] = jac_row(e.z);
    els.push_back(ej);
  }
  j["elements"] = els;
  ojson maps = ojson::array();
  for (const auto& d : m.maps) {
    ojson mj;
    mj["id"] = d.id;
    mj["source"] = d.source;
    mj["A"] = d.A;
    mj["B"] = d.B;
    mj["E"] = d.E;
    mj["c"] = d.c;
    mj["C"] = d.C;
    mj["zeta"] = d.zeta;
    if (!d.psi.empty()) {
      ojson ps = ojson::array();
      for (const auto& t : d.psi) {
        ojson tj;
        tj["family"] = t.family;
        tj["component"] = t.component;
        tj["amplitude"] = t.amplitude;
        ps.push_back(tj);
      }
      mj["psi"] = ps;
    }
    if (d.declared) {
      const JacobianBounds& b = *d.declared;
      ojson dj;
      dj["g1_x"] = iv_json(b.g1_x);
      dj["g1_y"] = jac_row(b.g1_y);
      dj["g1_z"] = jac_row(b.g1_z);
      dj["g2_x"] = jac_row(b.g2_x);
      dj["g2_y"] = jac_block(b.g2_y);
      dj["g2_z"] = jac_block(b.g2_z);
      dj["g3_x"] = jac_row(b.g3_x);
      dj["g3_y"] = jac_block(b.g3_y);
      dj["g3_z"] = jac_block(b.g3_z);
      mj["declared"] = dj;
    }
    maps.push_back(mj);
  }
  j["maps"] = maps;
  ojson st;
  st["x_B"] = m.bcg.x_B;
  st["x_C"] = m.bcg.x_C;
  st["x_G"] = m.bcg.x_G;
  j["structure"] = st;
  j["claims"] = m.claims;
  if (!m.arrays.empty()) {
    ojson as = ojson::array();
    for (const auto& a : m.arrays) {
      ojson aj;
      aj["maps"] = a.maps;
      aj["slot_target"] = a.slot_target;
      aj["copy"] = a.copy;
      aj["slot"] = a.slot;
      as.push_back(aj);
    }
    j["arrays"] = as;
  }
  j["cone_floor"] = m.cone_floor;
  j["budget_floor"] = m.budget_floor;
  if (m.gap_minus_map > 0) j["gap_minus_map"] = m.gap_minus_map;
  if (m.gap_plus_map > 0) j["gap_plus_map"] = m.gap_plus_map;
  return j;
}

ojson intersection_json(const IntersectionResult& r) {
  ojson j;
  j["point"] = point_json(r.point);
  ojson coding = ojson::array();
  for (int id : r.coding.symbols) coding.push_back(id);
  j["coding"] = coding;
  j["depth"] = r.depth;
  j["residual"] = r.residual;
  j["x_enclosure"] = iv_json(r.x_enclosure);
  ojson zs = ojson::array();
  for (const auto& z : r.z_enclosure) zs.push_back(iv_json(z));
  j["z_enclosure"] = zs;
  j["orbit_length"] = static_cast<int>(r.orbit.size());
  return j;
}

ojson leaf_box_json(const LeafBox& b) {
  ojson j;
  j["element"] = b.element;
  j["window"] = iv_json(b.x_window);
  ojson prefix = ojson::array();
  for (int id : b.coding_prefix.symbols) prefix.push_back(id);
  j["prefix"] = prefix;
  return j;
}

ojson tangency_json(const TangencyResult& r) {
  ojson j;
  j["leaf"] = leaf_box_json(r.leaf);
  j["parameter"] = r.parameter;
  j["point"] = point_json(r.point);
  j["tangent_margin"] = r.tangent_margin;
  j["depth"] = r.depth;
  return j;
}

ojson prefold_check_json(const PrefoldCheck& c) {
  ojson j;
  j["pass"] = c.pass;
  j["markers_on_leaf"] = c.markers_on_leaf;
  j["leaf_in_gap"] = c.leaf_in_gap;
  j["center_hit"] = c.center_hit;
  j["marker_residual"] = c.marker_residual;
  j["gap_margin"] = c.gap_margin;
  j["center_reach"] = c.center_reach;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "step,element,strip,x_lo,x_hi,width,kind\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.element << ',' << r.strip << ','
        << fmt17(r.x.lo) << ',' << fmt17(r.x.hi) << ','
        << fmt17(r.x.width()) << ',' << r.kind << '\n';
  }
  return out.str();
}

Expected<Model> model_from_json_text(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return Error{"PARSE", "line " + std::to_string(line_of(text, e.byte)) +
                              ": " + e.what()};
  }
  try {
    return model_of(j);
  } catch (const SchemaError& e) {
    return Error{"PARSE", e.what()};
  }
}

Expected<Model> read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{"IO", "cannot open '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json_text(buf.str());
}

Expected<SpecMeta> spec_from_json_text(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return Error{"PARSE", "line " + std::to_string(line_of(text, e.byte)) +
                              ": " + e.what()};
  }
  try {
    return spec_of(j);
  } catch (const SchemaError& e) {
    return Error{"PARSE", e.what()};
  }
}

Expected<SpecMeta> read_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error{"IO", "cannot open '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  return spec_from_json_text(buf.str());
}

Expected<bool> write_text_atomic(const std::string& path,
                                 const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::path target(path);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) return Error{"IO", "cannot create '" +
                                   target.parent_path().string() + "'"};
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return Error{"IO", "cannot write '" + tmp.string() + "'"};
    out << text;
    out.flush();
    if (!out) return Error{"IO", "write failed for '" + tmp.string() + "'"};
  }
  fs::rename(tmp, target, ec);
  if (ec) return Error{"IO", "rename failed for '" + path + "'"};
  return true;
}

}  // namespace blender
