#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sspa/syntax.hpp"

namespace sspa {

// One step of the labelled transition system. `rate` stays passive when the
// source has an unclosed passive prefix on that label.
struct Transition {
  Label label;
  RateSpec rate;
  TermPtr target; // canonical form
};

// Sorts choice branches by (label, rate, formatted continuation), recursively.
// Two terms are structurally congruent iff their canonical forms format
// identically; state identity everywhere is the canonical form.
TermPtr canonicalize(const Model& model, const TermPtr& term);

// Unfolds identifier aliases whose equation body is not a choice (also inside
// closure spines and cooperation slots), so that `Cc` with Cc = C0[a <- 2]
// and a re-entered C0[a <- 2] intern to the same state. Choice-bodied
// identifiers keep their name. Throws ill_founded on alias cycles.
TermPtr resolve_state(const Model& model, const TermPtr& term);

// The full transition multiset of a term: choice axiom, identifier unfolding,
// closure rewriting (passive matching label -> closure rate; active rates
// kept; the closure wrapper is pushed onto every target), and pairwise
// cooperation. Result is sorted by (label, rate, formatted target) with
// multiplicities preserved. Throws ill_founded when identifier unfolding
// never reaches a choice or 0.
std::vector<Transition> derive_transitions(const Model& model, const TermPtr& term);

// Active/passive/unique-passive label sets, computed as fixpoints over the
// identifier equation system: least fixpoints from the empty set for A and P,
// greatest fixpoint from the model's label universe for U (the universe
// stands in for the infinite label alphabet; sound because every clause only
// ever intersects U with model labels).
class LabelAnalysis {
public:
  explicit LabelAnalysis(const Model& model);

  const std::set<Label>& universe() const { return universe_; }
  std::set<Label> active(const TermPtr& term) const;
  std::set<Label> passive(const TermPtr& term) const;
  std::set<Label> unique_passive(const TermPtr& term) const;

private:
  std::set<Label> eval_active(const TermPtr& term) const;
  std::set<Label> eval_passive(const TermPtr& term) const;
  std::set<Label> eval_unique(const TermPtr& term) const;

  const Model* model_;
  std::set<Label> universe_;
  std::map<std::string, std::set<Label>> active_, passive_, unique_;
};

std::set<Label> active_labels(const Model& model, const TermPtr& term);
std::set<Label> passive_labels(const Model& model, const TermPtr& term);
std::set<Label> unique_passive_labels(const Model& model, const TermPtr& term);

// A process is closed when it has no passive labels left. An alternative
// convention defines closedness as "no active labels"; that reading is
// incompatible with how closure is used (closing every passive label must
// yield a closed process), but `literal_active_reading` exposes it for
// diagnostics.
bool is_closed(const Model& model, const TermPtr& term, bool literal_active_reading = false);

enum class WfMode { strict, lenient };

struct WfReport {
  bool ok = true;
  std::string witness; // violated condition + witness, empty when ok
};

// Well-formedness of a simple process:
//   (1) active and passive labels are disjoint;
//   (2) strict: if P != empty then P equals the unique-passive set;
//       lenient: every reachable state has at most one distinct outgoing
//       passive label (admits repeated passive branches on one label).
WfReport is_well_formed(const Model& model, const TermPtr& term, WfMode mode,
                        std::size_t state_budget = 100000);

struct CoopDiagnostics {
  std::vector<std::string> errors;   // pairwise disjointness violations
  std::vector<std::string> warnings; // blocked labels, nested-pair issues
  bool ok() const { return errors.empty(); }
};

// Pairwise validation of a cooperation: for i != j both A_i & A_j & L and
// P_i & P_j & L must be empty; labels in L with no active or no passive owner
// are legal but blocked, so they only warn. Violations between top-level
// simple components are errors; any pair involving a nested cooperation is
// beyond the simple-process label sets and is reported as a warning instead
// (the associativity counterexample needs such a nested pair to be runnable).
CoopDiagnostics validate_cooperation(const Model& model, const CoopT& coop);

TermPtr apply_closure(const TermPtr& term, const Label& label, double rate);
// Batch closure in ascending label order (the order is semantically
// irrelevant but must be deterministic).
TermPtr apply_closure_set(const TermPtr& term, const std::map<Label, double>& assignment);

struct BisimResult {
  bool bisimilar = false;
  std::size_t states = 0;                      // union LTS size
  std::vector<std::vector<std::string>> blocks; // witness partition (state names)
};

// Strong bisimilarity via partition refinement over the union LTS of both
// terms. Transitions are matched existentially on (label, rate); multiplicities
// are ignored. Throws on state budget exhaustion.
BisimResult strong_bisimilar(const Model& model, const TermPtr& lhs, const TermPtr& rhs,
                             std::size_t state_budget = 100000);

} // namespace sspa
