#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blenderlab/expected.hpp"
#include "blenderlab/geometry.hpp"
#include "blenderlab/interval.hpp"

namespace blender {

// Smooth perturbation attached to one output component of a map.  Supported
// families (a = amplitude):
//   "sin_x"  : a * sin(x)            -- centre-only dependence
//   "sin_xy" : a * sin(x * ybar_1)   -- couples centre and expanding block
//   "sin_xz" : a * sin(x + z_1)      -- couples centre and contracting block
// component selects the output block: 1 = centre, 2 = y (first coordinate),
// 3 = z (first coordinate).
struct PsiTerm {
  std::string family;
  int component = 1;
  double amplitude = 0.0;
};

// Interval enclosures of the forward partial derivatives in cross
// coordinates: inputs (x, ybar, z), outputs (xbar, y, zbar).  Block g1 is the
// centre row, g2 the y rows, g3 the z rows.
struct JacobianBounds {
  Interval g1_x;
  std::vector<Interval> g1_y, g1_z;
  std::vector<Interval> g2_x;
  std::vector<std::vector<Interval>> g2_y, g2_z;
  std::vector<Interval> g3_x;
  std::vector<std::vector<Interval>> g3_y, g3_z;
};

// One affine-core map in cross form:
//   xbar   = A x + B + psi1(x, ybar, z)
//   y_i    = c_i + ybar_i / E_i + psi2(x, ybar, z)
//   zbar_j = zeta_j + C_j z_j + psi3(x, ybar, z)
// E is signed (negative = orientation-reversing in that y coordinate), as is
// C.  A bounds-only map carries declared derivative enclosures instead of an
// evaluable formula; such maps support verification but not point evaluation.
struct MapDef {
  int id = 0;
  int source = 0;
  double A = 0.0, B = 0.0;
  std::vector<double> E;
  std::vector<double> c;
  std::vector<double> C;
  std::vector<double> zeta;
  std::vector<PsiTerm> psi;
  std::optional<JacobianBounds> declared;  // bounds-only maps

  bool evaluable() const { return !declared.has_value(); }
};

// Horizontal geometry of the blender construction: half-width of the base
// region, of the centre region, and the gap position (0 = unset).
struct BcgStructure {
  double x_B = 0.0;
  double x_C = 0.0;
  double x_G = 0.0;
};

// A group of strips certified to share common base/centre windows; the unit
// the array covering properties quantify over.
struct ArrayDef {
  std::vector<int> maps;
  double slot_target = 0.0;
  int copy = 0;
  int slot = 0;
};

struct SpecMeta;  // defined with the specification machinery

struct Model {
  std::string name;
  int du = 1, dss = 1;
  std::vector<BoxXYZ> elements;
  std::vector<MapDef> maps;
  BcgStructure bcg;
  std::vector<std::string> claims;   // covering properties the model asserts
  std::vector<ArrayDef> arrays;
  double cone_floor = 0.05;          // lower bound applied to cone openings
  double budget_floor = 0.0;         // lower bound on the disc-class budgets
  int gap_minus_map = -1;            // strip whose constant coding marks the
  int gap_plus_map = -1;             //   left / right gap leaves
  std::shared_ptr<const SpecMeta> meta;

  const MapDef& map_by_id(int id) const;
  int map_index(int id) const;  // position of a map id in `maps`
  const BoxXYZ& source_box(const MapDef& m) const { return elements[m.source]; }
  // Hull of every element's y-box: the conservative ybar domain used when a
  // bound must hold for all target elements at once.
  std::vector<Interval> ybar_hull() const;
  bool claimed(const std::string& prop) const;
};

// --- psi evaluation -------------------------------------------------------

double psi_value(const PsiTerm& t, double x, const std::vector<double>& ybar,
                 const std::vector<double>& z);
// Sum of all terms of `component` on the map.
double psi_component(const MapDef& m, int component, double x,
                     const std::vector<double>& ybar,
                     const std::vector<double>& z);
// Certified range of sin over an interval.
Interval sin_range(const Interval& a);
// Certified sup of |psi| and of its first partials over given boxes.
struct PsiBounds {
  Interval value;
  Interval d_x;
  Interval d_y1;  // first ybar coordinate (others are zero)
  Interval d_z1;  // first z coordinate
};
PsiBounds psi_bounds(const PsiTerm& t, const Interval& xbox,
                     const Interval& ybox1, const Interval& zbox1);
// C1 norm of the whole psi package of one component over the element boxes.
double psi_c1_norm(const Model& model, const MapDef& m, int component);

// --- derivative assembly --------------------------------------------------

// Interval Jacobian over the source element (declared bounds win when set).
JacobianBounds jacobian_bounds(const Model& model, const MapDef& m);
// Pointwise Jacobian at a cross point (x, ybar, z).
JacobianBounds point_jacobian(const Model& model, const MapDef& m, double x,
                              const std::vector<double>& ybar,
                              const std::vector<double>& z);

// Largest row sum of sup-magnitudes across a list of blocks laid side by
// side; rows must agree across the blocks.
double row_sum_norm(const std::vector<const std::vector<std::vector<Interval>>*>& blocks);

// --- verification ---------------------------------------------------------

struct HyperbolicityReport {
  double line1 = 0.0;  // (xbar, zbar)-rows contraction expression
  double line2 = 0.0;  // y-rows expression
  double mu = 0.0;     // max of the two; certified < 1
  double margin = 0.0;
};
// Checks the two cross-form contraction inequalities; VIOLATION when a line
// reaches 1.
Expected<HyperbolicityReport> verify_hyperbolicity(const Model& model,
                                                   const MapDef& m);

struct PartialHyperbolicityReport {
  Interval center_dx;   // sign-definite, inside (0,1) in magnitude
  double line1 = 0.0;   // inverted-map z-row expression, certified < 1
  double nu = 0.0;      // inverted-map composite expression, certified < 1
  double margin = 0.0;  // min(1 - line1, 1 - nu, 1 - |center_dx|)
};
// Checks invertibility of the centre derivative and the two inequalities of
// the x-inverted cross map.  DEGENERATE when the centre derivative straddles
// zero, VIOLATION when an inequality fails.
Expected<PartialHyperbolicityReport> verify_partial_hyperbolicity(
    const Model& model, const MapDef& m);

struct ConeReport {
  ConeConstants k;
  double floor = 0.0;
  double expansion = 0.0;    // certified y-growth factor on the u-cone, > 1
  double contraction = 0.0;  // certified z-decay factor on the ss-cone, < 1
  double u_gap = 0.0;        // transfer-map slack at the fixed point
  double s_gap = 0.0;
  double ss_gap = 0.0;
};
// Iterates the three cone-transfer maps over all maps of the model to a
// common fixed point, then applies the model's floor.  NO_CONE when a
// transfer map fails to contract below opening 1.
Expected<ConeReport> cone_constants_for(const Model& model);

// Per-strip and per-element deviation bounds for the canonical disc classes
// the covering certificates quantify over.
struct DeviationBudget {
  std::vector<double> delta_map;  // indexed by map id: Delta_i
  std::vector<double> delta_ss;   // per element: ss-disc x half-deviation
  std::vector<double> delta_u;    // per element: u-disc y half-deviation
  double delta_tilde = 0.0;       // uniform grid-level bound

  double max_delta_ss() const;
  double max_delta() const;
};
DeviationBudget budgets_for(const Model& model, const ConeReport& cones);

// --- evaluation -----------------------------------------------------------

// Image point F(P) = (xbar, ybar, zbar) under map m, requiring the image to
// land in the strip over `target` (its ybar in the target y-box).  Errors:
// NOT_IN_STRIP, NO_CONVERGE, OPAQUE.
Expected<Point3> eval_forward(const Model& model, int map_id, const Point3& p,
                              int target);
// Preimage of an image point (Picard on (x, z)); errors NO_CONVERGE, OPAQUE.
Expected<Point3> eval_backward(const Model& model, int map_id,
                               const Point3& image);

// Model with the standard perturbation package of C1 norm `amp` attached to
// every evaluable map (centre: sin_x, y: sin_xy scaled down by the largest
// expansion so the implicit solves stay contractive, z: sin_xz).
Model with_psi(const Model& model, double amp);

// Inverse partition: every map is replaced by its inverse in cross form, so
// the expanding and strong-stable roles trade places and the centre
// coefficient becomes 1/A.  Running it twice restores the original element
// ids, dimensions, and (up to rounding) coefficients.  Maps carrying
// perturbation terms come back as bounds-only (their inverse has no closed
// form); affine maps stay evaluable.
Model invert_partition(const Model& model);

// --- builtins -------------------------------------------------------------

// Two full-width strips, one orientation-reversing; claims the base covering
// property.
Model builtin_horseshoe();
// Three aligned affine strips with centre structure; claims base and centre
// coverings.
Model builtin_affine3();
// Single self-map strip used by the evaluation examples.
Model builtin_toy_affine();

}  // namespace blender
