#pragma once

#include <map>
#include <string>
#include <vector>

#include "sspa/semantics.hpp"

namespace sspa {

// Linear rate expression: a numeric part plus per-label variable terms.
// Within one chain every passive rate with the same label is the same
// variable (printed "x_<label>"), so two passive a-branches contribute 2x_a,
// never x + y.
struct RateExpr {
  double num = 0.0;
  std::map<Label, double> vars; // label -> coefficient

  bool zero() const { return num == 0.0 && vars.empty(); }
  bool numeric() const { return vars.empty(); }
  RateExpr& operator+=(const RateExpr& other);
  RateExpr operator-() const;
  bool operator==(const RateExpr& other) const = default;

  // Throws when a variable's label is missing from the assignment.
  double eval(const std::map<Label, double>& assignment) const;
  std::string str() const; // e.g. "2x_a + 3", "-2x_a", "0"

  static RateExpr constant(double v);
  static RateExpr variable(const Label& label, double coeff = 1.0);
  static RateExpr of(const RateSpec& rate, const Label& label);
};

struct Arc {
  Label label;
  RateSpec rate;
  int target;
};

// Derivative set of an initial term: BFS closure under the transition
// relation, states in canonical form, deterministic order (transitions are
// expanded in their canonical sort order).
struct StateSpace {
  std::vector<TermPtr> states;
  std::vector<std::string> names;
  std::map<std::string, int> index;
  std::vector<std::vector<Arc>> arcs; // per source state, canonical order
  std::size_t size() const { return states.size(); }
};

StateSpace enumerate_states(const Model& model, const TermPtr& initial, std::size_t budget);

// q(from -> to): multiset sum over all labels, self-loops excluded by
// definition (throws precondition on from == to).
RateExpr rate_total(const StateSpace& space, int from, int to);

// q_a(from -> to): label-filtered sum; self-loops allowed and meaningful.
RateExpr rate_labelled(const StateSpace& space, int from, int to, const Label& label);

// Generator matrix: off-diagonals are rate_total values, self-loop rates are
// dropped, diagonal is the negated row sum. Entries may stay symbolic.
struct GeneratorMatrix {
  std::size_t n = 0;
  std::vector<std::map<int, RateExpr>> off; // absent entry = zero
  std::vector<RateExpr> diag;
  RateExpr entry(int i, int j) const;
};

GeneratorMatrix build_generator(const StateSpace& space);

// Numeric instantiation; requires the assignment to cover every variable.
std::vector<std::vector<double>> evaluate_generator(const GeneratorMatrix& g,
                                                    const std::map<Label, double>& assignment);

struct SccReport {
  bool irreducible = false;
  std::vector<std::vector<int>> components;
};

// Strong connectivity of the transition digraph. Passive arcs carry no
// positive rate and are skipped by default; pass include_passive = true to
// treat them as edges (the shape of the chain after closure).
SccReport strongly_connected(const std::vector<std::vector<Arc>>& arcs,
                             bool include_passive = false);
SccReport check_irreducible(const StateSpace& space, bool include_passive = false);

struct Measure {
  std::vector<double> values;
  bool normalized = false;
  double residual = 0.0; // max_j |sum_i pi_i q_ij| for the returned scaling
};

// Left null vector of a zero-row-sum generator via dense Gaussian
// elimination; the last equation is replaced by the normalization constraint
// for reproducible pivoting. Refuses reducible chains (singular beyond the
// one-dimensional null space). With normalize = false the measure is rescaled
// so its last entry is 1.
Measure solve_invariant(const std::vector<std::vector<double>>& q, bool normalize,
                        std::size_t dim_budget = 4000);

// Dense text export: one row per line, entries space-separated.
std::string generator_text(const GeneratorMatrix& g);
std::string generator_text(const std::vector<std::vector<double>>& q);

} // namespace sspa
