#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "blenderlab/covering.hpp"
#include "blenderlab/crossmap.hpp"
#include "blenderlab/expected.hpp"
#include "blenderlab/interval.hpp"

namespace blender {

// Smallest index a coefficient is allowed to carry at resolution delta.
int64_t admissibility_threshold(double delta);

// One target position on the specification grid.
struct GridSlot {
  int copy = 0;    // shift copy: 0, 1 (+D/3), 2 (+2D/3)
  int n = 0;       // index within the copy; -1 marks the extra low point
  double target = 0.0;
};

// The horizontal skeleton of the construction: an equally spaced ladder from
// -x_B to x_B, duplicated at thirds of the spacing, with one extra point
// below each shifted copy.
struct GridPlan {
  double alpha = 0.0;
  double x_B = 0.0, x_C = 0.0, x_G = 0.0;
  double D = 0.0;            // ladder spacing
  int m = 0, N = 0;          // N = 8m + 1 rungs per copy (plus the endpoint)
  int k = 1;                 // array multiplicity
  int shift_copies = 3;      // 3 = full construction, 1 = single ladder
  bool separated_ok = false; // alpha passes the strengthened-overlap bound
  int arity_required = 0;    // slots needed for centre-window coverage
  double delta_cap = 0.0;    // grid deviation the spacing inequality allows

  double grid_point(int n) const { return -x_B + n * D; }
  double slot_target(int copy, int n) const {
    return grid_point(n) + copy * D / 3.0;
  }
  // Slot list for one family: copy 0 in full, shifted copies with their
  // extra n = -1 point first.
  std::vector<GridSlot> slots() const;
};

// Smallest valid plan for the given contraction rate; NO_ALPHA when the rate
// is too large for the ladder inequalities (iterate the family first), NO_N
// when no ladder length fits the window.
Expected<GridPlan> plan_grid(double alpha, double x_B, int k);

// One selected coefficient: the strip it realizes and where it must land.
struct SpecRole {
  int64_t index = 0;
  double A = 0.0, B = 0.0;
  double envelope = 0.0;  // certified |A - alpha| bound
  double psi_c1 = 0.0;    // declared perturbation budget of the source
  GridSlot slot;
  int family = 0;
};

// A full assignment of coefficients to grid slots, with the achieved
// deviation and the refined gap anchors.
struct SpecificationPair {
  double delta = 0.0;        // resolution the schedule stopped at
  int schedule_step = 0;
  double delta_tilde = 0.0;  // max over roles of envelope + |B - target|
  double sigma = 0.0;        // per-family target offset
  double x_G = 0.0;          // refined gap position (fixed-point anchors)
  int gap_minus_slot = -1;   // role positions of the two anchor strips
  int gap_plus_slot = -1;
  std::vector<SpecRole> roles;  // family-major, slot order within a family
};

// A coefficient family: contraction rates near alpha(), offsets dense in an
// interval around 0, indexed admissibly.
class CoefficientSource {
 public:
  virtual ~CoefficientSource() = default;
  virtual std::string name() const = 0;
  virtual double alpha() const = 0;
  virtual Interval dense_interval() const = 0;
  // Best admissible coefficient for `target` at resolution delta, skipping
  // `taken` indices; NO_CANDIDATE when the family has nothing nearby.
  virtual Expected<SpecRole> pick(double target, double delta,
                                  const std::set<int64_t>& taken) const = 0;
};

// Offsets enumerate the odd dyadic rationals of the dense interval by level;
// the level deepens with the resolution, so picks refine as delta drops.
class DyadicSource : public CoefficientSource {
 public:
  explicit DyadicSource(double alpha, double half_width = 0.95)
      : alpha_(alpha), w_(half_width) {}
  std::string name() const override { return "dyadic"; }
  double alpha() const override { return alpha_; }
  Interval dense_interval() const override { return Interval(-w_, w_); }
  Expected<SpecRole> pick(double target, double delta,
                          const std::set<int64_t>& taken) const override;
  // Coefficient pair of a raw index (used by the admissibility examples).
  std::pair<double, double> value(int64_t index, double delta) const;

 private:
  double alpha_;
  double w_;
};

// Wrapper that refuses offsets inside (lo, hi): a density violation used to
// exercise the EXHAUSTED reporting path.
class GapFilteredSource : public CoefficientSource {
 public:
  GapFilteredSource(const CoefficientSource& inner, double lo, double hi)
      : inner_(inner), lo_(lo), hi_(hi) {}
  std::string name() const override { return inner_.name() + "-gapped"; }
  double alpha() const override { return inner_.alpha(); }
  Interval dense_interval() const override { return inner_.dense_interval(); }
  Expected<SpecRole> pick(double target, double delta,
                          const std::set<int64_t>& taken) const override;

 private:
  const CoefficientSource& inner_;
  double lo_, hi_;
};

// Coefficients from a saddle-focus return family: B = sign * gamma^-m |s2|,
// A = (B - c) s1 / s2 with s1 = sin(k omega + eta1), s2 = sin(k omega +
// eta2).  Emission keeps both sines away from zero.
class SaddleFocusSource : public CoefficientSource {
 public:
  SaddleFocusSource(double omega, double eta1, double eta2, double c,
                    double target_alpha);
  std::string name() const override { return "saddle-focus"; }
  double alpha() const override { return target_alpha_; }
  Interval dense_interval() const override { return Interval(-0.98, 0.98); }
  Expected<SpecRole> pick(double target, double delta,
                          const std::set<int64_t>& taken) const override;
  // Raw emission for one rotation count: (A, B) at the quantization level
  // nearest `want_b`, or false if the emission filters reject k.
  bool emit(int64_t k, double want_b, double* A, double* B) const;

 private:
  struct Entry {
    double ratio;    // s1 / s2
    double log_s2;   // log |s2|
    int64_t k;
    double s2_sign;
  };
  const std::vector<Entry>& table() const;

  double omega_, eta1_, eta2_, c_, target_alpha_;
  mutable std::vector<Entry> table_;  // lazily built, sorted by ratio
};

// n-fold composition of a base family: contraction alpha^n, offsets realized
// by composing picks (inner word steering to 0, outer correcting).
class IteratedSource : public CoefficientSource {
 public:
  IteratedSource(const CoefficientSource& base, int n) : base_(base), n_(n) {}
  std::string name() const override;
  double alpha() const override;
  Interval dense_interval() const override { return base_.dense_interval(); }
  Expected<SpecRole> pick(double target, double delta,
                          const std::set<int64_t>& taken) const override;

 private:
  const CoefficientSource& base_;
  int n_;
};

// Runs the descending resolution schedule delta_s = 2^-s, picking one
// coefficient per slot and family at each step, until the achieved deviation
// passes every construction inequality.  EXHAUSTED reports the binding
// inequality and the worst slot.
struct ScheduleOptions {
  int s_min = 1;
  int s_max = 40;
};
Expected<SpecificationPair> select_indices(const CoefficientSource& source,
                                           const GridPlan& plan,
                                           ScheduleOptions opts = {});

// Everything the certificates need to re-derive the construction margins.
struct SpecMeta {
  GridPlan plan;
  SpecificationPair spec;
  std::string source;
};

// Realizes the specification as a cross-map model: one element (y-slab,
// z-slot) and one strip per role, full transition, arrays pairing the k
// families per slot, gap anchors marked.  INADMISSIBLE if any role's index
// is at or below the threshold for spec.delta.
Expected<Model> build_markov(const GridPlan& plan, const SpecificationPair& spec,
                             const std::string& source_name);

// The named construction inequalities evaluated against the model's achieved
// budgets (empty when the model carries no specification).
std::vector<Certificate> construction_checks(const Model& model,
                                             const DeviationBudget& budgets);

// Fully built specification models (abort on internal failure: these are
// fixed constructions, not user input).
Model builtin_nabs_dyadic(int k);
Model builtin_nabs_saddlefocus(int k);

}  // namespace blender
