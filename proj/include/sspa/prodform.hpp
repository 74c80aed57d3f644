#pragma once

#include "sspa/ctmc.hpp"

namespace sspa {

struct SolverConfig {
  double init_kappa = 1.0;
  double damping = 0.5;    // update weight on the freshly fitted value, in (0,1]
  double conv_tol = 1e-10; // relative change of the fitted rates between passes
  double check_tol = 1e-8; // relative spread allowed by the constancy check
  int max_iter = 500;
  std::size_t state_budget = 100000;
  std::size_t dim_budget = 4000;
  WfMode mode = WfMode::strict;
};

enum class SolveStatus { satisfied, violated, not_converged };
const char* to_string(SolveStatus status);

// One constancy check: the per-state reversed rates of a cooperation label on
// the component that actively owns it, against the invariant measure of that
// component's closed chain.
struct ReversedRateCheck {
  std::string component;
  Label label;
  std::vector<double> values;
  double spread = 0.0; // relative (max-min)/mean; absolute max-min if mean underflows
  double kappa = 0.0;  // mean of `values`
  bool constant = false;
  std::string note;
};

struct ComponentSolution {
  std::string name; // source form of the open component
  StateSpace space; // open chain; pi is indexed by its states
  Measure pi;       // invariant measure of the component closed with the kappas
};

struct ProductFormSolution {
  SolveStatus status = SolveStatus::not_converged;
  std::map<Label, double> kappas; // per cooperation label with an active owner
  std::vector<ComponentSolution> components;
  Measure product; // Kronecker product of the component measures, component 1 outermost
  std::vector<ReversedRateCheck> checks;
  int iterations = 0; // solve/fit passes, including the polish rounds
  std::vector<std::string> warnings;
};

// Wraps the component with one closure per passive label, taking rates from
// the kappa map. A passive label outside the cooperation set (or missing from
// the map) has no rate to take: "unclosable".
TermPtr close_component(const Model& model, const TermPtr& component,
                        const std::set<Label>& coop_set, const std::map<Label, double>& kappas);

// Per-state reversed rates of `label` on a closed component:
//   v[s] = sum_{s'} q_label(s' -> s) * pi[s'] / pi[s]
// with self-loop contributions included. `pi` must be indexed by the closed
// chain's own enumeration order.
std::vector<double> reversed_rates(const Model& model, const TermPtr& closed_component,
                                   const Label& label, const Measure& pi,
                                   std::size_t state_budget = 100000);

// The product-form engine: closes every component with the current rate
// guesses, solves the component chains, refits each cooperation label's rate
// as the mean reversed rate on its active owner, and iterates (damped) to a
// fixed point; the final pass judges Eq-style constancy per label and
// assembles the Kronecker product on success.
ProductFormSolution solve_product_form(const Model& model, const SystemDef& system,
                                const SolverConfig& config = {});

// Kronecker product of measures, first factor outermost:
// (p1, .., pn) x m -> (p1*m, p2*m, .., pn*m).
Measure assemble_product(const std::vector<Measure>& measures);

// Joint chain over the FULL cartesian product of component chains, built by
// the pairwise cooperation rule directly on index tuples (component 1
// outermost). Independent of the term-level transition machinery, so it can
// serve as an oracle for it.
struct JointChain {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> strides;
  std::size_t size = 0;
  std::vector<std::string> names; // "(E0,C1,T0)"
  std::vector<std::vector<Arc>> arcs;
  std::vector<char> reachable; // BFS from the all-initial tuple
  bool reachable_all = false;
};

JointChain build_joint_chain(const std::vector<const StateSpace*>& components,
                             const std::set<Label>& coop_set, std::size_t state_budget);

struct OracleReport {
  bool solved = false;           // a unique stationary distribution was found
  double gap_abs = 0.0;          // max |product - joint| (NaN when not solved)
  double gap_rel = 0.0;          // max per-state relative difference (NaN when not solved)
  bool reachable_equals_product = false;
  bool joint_irreducible = false;
  double product_residual = 0.0; // ||pi_product * Q_joint||_inf, always computed
  double max_q = 0.0;            // max |Q_joint| entry
  std::size_t joint_states = 0;
  std::string note;
};

// Independent check of the product form: solve the joint chain directly over
// the full product space and compare. A reducible joint chain is a hypothesis
// failure and is reported, not raised; the stationary distribution is then
// taken on the single reachable terminal class when one exists.
OracleReport verify_against_joint(const Model& model, const SystemDef& system,
                                  const ProductFormSolution& solution,
                                  std::size_t state_budget = 100000,
                                  std::size_t dim_budget = 4000);

} // namespace sspa
