#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blenderlab/covering.hpp"
#include "blenderlab/expected.hpp"
#include "blenderlab/geometry.hpp"

namespace blender {

// One refinement step of a backward-nesting run.  `x` is the certified
// forward enclosure of the cylinder selected so far; `kind` labels what the
// step did ("start", "strip", "slot", "fold", "tangency").
struct TraceRow {
  int step = 0;
  int element = 0;
  int strip = 0;  // map id chosen at this step (0 for the start row)
  Interval x;
  std::string kind;
};

// Which window family drives strip selection during refinement.
enum class WindowMode { Base, Center };

// Result of driving an ss-disc onto an unstable leaf: the coding chosen, a
// point on the disc whose backward orbit realizes it, and the certified
// enclosures at the deepest level.
struct IntersectionResult {
  Point3 point;                  // on the input disc, in its element's chart
  Coding coding;                 // map ids, outermost first
  int depth = 0;
  double residual = 0.0;         // width of the deepest forward enclosure
  Interval x_enclosure;          // deepest certified x-window
  std::vector<Interval> z_enclosure;
  std::vector<Point3> orbit;     // backward orbit of `point` along the coding
  std::vector<TraceRow> trace;
};

// Refines strip choices backward until the forward-composed enclosure is
// thinner than tol.  `forced_first` pins the first symbol (0 = free choice).
// When `trace_out` is given the rows produced so far are copied there even
// on failure, so callers can persist partial traces.
// Errors: STUCK (no window strictly contains the projection), NOT_CROSSING,
// MAX_DEPTH, NO_CONVERGE.
Expected<IntersectionResult> find_unstable_intersection(
    const CoverContext& cx, const SsDisc& disc, double tol,
    int max_depth = 200, WindowMode mode = WindowMode::Base,
    int forced_first = 0, std::vector<TraceRow>* trace_out = nullptr);

// Certified preimage of an ss-disc under one strip: the disc must cross the
// strip's base window; the result lives in the strip's source element.
// Errors: NOT_CROSSING, INVARIANT_BREACH (Lipschitz class violated),
// NO_CONVERGE, OPAQUE.
Expected<SsDisc> preimage_disc(const CoverContext& cx, int map_id,
                               const SsDisc& disc);

// Strategy for one folding-reproduction step: follow a single strip chain
// (separated structure) or a slot inside an exact folding array.
enum class FoldMode { Separated, Arrayed };

// Outcome of one reproduction step.  When `tangency` is set the step found a
// fold-marker contact instead of refining; otherwise `family` is the
// reproduced family one level deeper, `strip` the map pulled through,
// `offset`/`scale` the parameter change t_old = offset + scale * t_new.
struct FoldStep {
  bool tangency = false;
  double t = 0.0;           // contact parameter (tangency steps only)
  double slack = 0.0;       // cone-contact slack at the contact
  FoldingFamily family;
  int strip = 0;
  double offset = 0.0;
  double scale = 1.0;
};

// Reproduces a folding family one step backward: restricts the family to the
// fibres whose centre lands in the chosen window, renormalizes t to [0, 1],
// and pulls through the strip.  `forced_map` pins the strip (0 = free).
// Errors: TANGENCY_FOUND is never an error (reported in the step); STUCK,
// INVARIANT_BREACH, NO_CONVERGE.
Expected<FoldStep> reproduce_folding(const CoverContext& cx,
                                     const FoldingFamily& family,
                                     FoldMode mode,
                                     double tangent_threshold = 1e-10,
                                     int forced_map = 0);

// Nested symbolic box around a tangency: the element, the certified x-window
// of the leaf cylinder, and the refinement prefix realizing it.
struct LeafBox {
  int element = 0;
  Interval x_window;
  Coding coding_prefix;
};

struct TangencyResult {
  LeafBox leaf;
  double parameter = 0.0;     // fold parameter in the original family's t
  Point3 point;               // tangency point estimate in the deep chart
  double tangent_margin = 0.0;
  int depth = 0;
  std::vector<TraceRow> trace;
};

// Iterates reproduce_folding until a fold-marker tangency pins the contact
// inside an enclosure thinner than tol.  `trace_out` receives the rows even
// on failure.  Errors: MAX_DEPTH (detail reports the achieved width), STUCK,
// INVARIANT_BREACH.
Expected<TangencyResult> locate_tangency(const CoverContext& cx,
                                         const FoldingFamily& family,
                                         double tol, int max_depth = 60,
                                         double tangent_threshold = 1e-10,
                                         std::vector<TraceRow>* trace_out = nullptr);

// Injects an array coding prefix into a nested leaf box: each slot is pulled
// through by a certified arrayed reproduction step, while the reported window
// composes the same slots in a fixed frame array and closes with the hull of
// every infinite slot continuation.  Incomparable prefixes therefore get
// disjoint windows (siblings separate by the slot shift scaled down the
// chain) while extending a prefix shrinks its window and keeps nesting.
// `tol` caps the numerical padding of the enclosure, not its width.
Expected<LeafBox> coding_to_tangency(const CoverContext& cx,
                                     const FoldingFamily& family,
                                     const Coding& prefix, double tol);

// Deterministic seed families for the folding engines: a family spanning the
// widest centre window (fold seed), and one spanning the widest common array
// centre (array seed).
Expected<FoldingFamily> make_folding_family(const CoverContext& cx);
Expected<FoldingFamily> make_exact_array_family(const CoverContext& cx);

// The two creation scenarios for prefolding families.
enum class PrefoldScenario { RightCase, LeftCase };

// Largest unfolding displacement for which the right-case construction stays
// inside the base region after n_period backward steps through the left gap
// strip.  Errors: INVARIANT_BREACH when the model has no gap structure.
Expected<double> prefold_mu_limit(const CoverContext& cx, int n_period);

// Builds a prefolding family.  Right case: unfolds a gap-leaf tangency by mu
// and transports it n_period steps backward through the left gap strip,
// continuing until the centre region is reached; BAD_MU exactly when
// mu >= prefold_mu_limit.  Left case: transports the un-displaced tangent
// family backward until two fibres land on the right gap leaf (mu ignored).
Expected<FoldingFamily> make_prefolding(const CoverContext& cx,
                                        PrefoldScenario scenario,
                                        int n_period, double mu);

// Machine check of the two defining conditions of a prefolding family: the
// end fibres t = 0, 1 lie on a marked gap leaf on the correct side, and some
// interior fibre meets the centre region.
struct PrefoldCheck {
  bool pass = false;
  bool markers_on_leaf = false;
  bool leaf_in_gap = false;
  bool center_hit = false;
  double marker_residual = 0.0;  // worst |X(t_m) - leaf x|
  double gap_margin = 0.0;       // slack of the leaf inside its gap slab
  double center_reach = 0.0;     // penetration of the centre region
  std::string note;
};
PrefoldCheck check_prefolding(const CoverContext& cx,
                              const FoldingFamily& family);

}  // namespace blender
