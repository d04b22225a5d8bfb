#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blenderlab/crossmap.hpp"

namespace blender {

// Certified x-windows attached to one strip (one map): the image of the base
// part of the strip shrunk by the deviation budget, the centre analogue, the
// boundary enclosures, and the gap-image enclosures.  Labels are resolved for
// orientation: for A < 0 the left/right roles of the domain gaps swap, which
// collapses to the same formulas in |A|.
struct StripWindow {
  int map_id = 0;
  double alpha = 0.0;  // |A|
  double B = 0.0;
  double delta = 0.0;  // budget used in the 3-delta / 7-delta paddings
  bool flip = false;   // orientation-reversing centre branch
  Interval image;      // raw image of the base region (no shrink)
  Interval base;       // image shrunk by 3 delta
  Interval center;     // centre image shrunk by 3 delta (x_C set)
  bool has_center = false;
  Interval bnd_left, bnd_right;  // base boundary enclosures (3 delta pads)
  Interval gap_left, gap_right;  // gap-image enclosures (7 delta pads)
  bool has_gaps = false;
  bool center_safe = false;  // centre window wider than one budget unit
};

// Builds certified windows for every map.  EMPTY_WINDOW when margins
// degenerate a required window away.
Expected<std::vector<StripWindow>> strip_windows(const Model& model,
                                                 const DeviationBudget& b);

// Outcome of one covering-property check.  margins always includes
// "psi_budget": the perturbation C1 norm that provably preserves the verdict.
struct Certificate {
  std::string property;
  bool pass = false;
  std::map<std::string, double> margins;
  std::optional<std::pair<int, double>> witness;  // (strip or element id, x)
  std::string note;
};

// Conversion factor between a certificate margin and the perturbation C1
// norm that provably keeps the verdict: margin / psi_sensitivity(model).
double psi_sensitivity(const Model& model);

// Largest uniform shrink of the windows that still covers the target
// (negative when the raw windows already fail); the coverage margin.
double cover_slack(const std::vector<Interval>& windows,
                   const Interval& target);
// Midpoint of the first maximal uncovered gap at zero shrink.
std::optional<double> uncovered_point(const std::vector<Interval>& windows,
                                      const Interval& target);

// Everything the checks need, assembled once per model.
struct CoverContext {
  const Model* model = nullptr;
  ConeReport cones;
  DeviationBudget budgets;
  std::vector<StripWindow> windows;
};
Expected<CoverContext> make_cover_context(const Model& model);

// Base covering: every ss-disc of the budget class crossing the base region
// crosses some base window.
Certificate check_A1(const CoverContext& cx);
// Boundary covering with separation: a disc touching a base-window boundary
// crosses the centre of another strip whose centre window is separated from
// the first strip's.
Certificate check_A2(const CoverContext& cx);
// Centre covering; strengthened = the whole base region instead of the
// centre region must be covered by centre windows.
Certificate check_A3(const CoverContext& cx, bool strengthened);
// Array versions over the model's array list.
Certificate check_B1(const CoverContext& cx);
Certificate check_B2(const CoverContext& cx, bool mirrored);
Certificate check_B3(const CoverContext& cx, bool mirrored);
Certificate check_B4(const CoverContext& cx);
// Gap structure: centre-boundary witnesses exist with separation and the gap
// leaves clear the centre region; the precondition of the folding engines.
Certificate check_separated(const CoverContext& cx);
// Conjunction of the six array properties.
Certificate check_arrayed(const CoverContext& cx);

Certificate check_property(const CoverContext& cx, const std::string& prop);

// Full verification + certification sweep.
struct CertBundle {
  std::vector<std::pair<int, HyperbolicityReport>> hyp;
  std::vector<std::pair<int, PartialHyperbolicityReport>> phyp;
  ConeReport cones;
  DeviationBudget budgets;
  std::vector<Certificate> certs;
  std::vector<Certificate> construction;
  bool all_pass = false;
  std::optional<Error> failure;
};
// full = certify every property the model structure supports; otherwise only
// the claimed ones.
CertBundle certify_model(const Model& model, bool full);

}  // namespace blender
