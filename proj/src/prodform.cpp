#include "sspa/prodform.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace sspa {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::satisfied: return "satisfied";
    case SolveStatus::violated: return "violated";
    case SolveStatus::not_converged: return "not_converged";
  }
  return "unknown";
}

TermPtr close_component(const Model& model, const TermPtr& component,
                        const std::set<Label>& coop_set, const std::map<Label, double>& kappas) {
  std::map<Label, double> assignment;
  for (const Label& a : passive_labels(model, component)) {
    if (!coop_set.count(a))
      throw Error(Error::Kind::unclosable,
                  "component " + format_term(component) + " is unclosable: passive label '" + a +
                      "' lies outside the cooperation set");
    auto it = kappas.find(a);
    if (it == kappas.end())
      throw Error(Error::Kind::unclosable,
                  "component " + format_term(component) + " is unclosable: no rate available for passive label '" + a + "'");
    assignment[a] = it->second;
  }
  return apply_closure_set(component, assignment);
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Per-state reversed rates of one label over a component chain whose rates
// are read under `assignment` (so an open chain plus the kappa map behaves
// exactly like the closed chain). Self-loop contributions are included.
std::vector<double> reversed_on_space(const StateSpace& space,
                                      const std::map<Label, double>& assignment,
                                      const Label& label, const std::vector<double>& pi) {
  std::vector<double> v(space.size(), 0.0);
  for (std::size_t s = 0; s < space.size(); ++s) {
    if (!(pi[s] > 0.0))
      throw Error(Error::Kind::reducible,
                  "non-positive invariant-measure entry at state " + space.names[s] +
                      " (reducibility leak)");
    for (const Arc& arc : space.arcs[s])
      if (arc.label == label)
        v[arc.target] += RateExpr::of(arc.rate, arc.label).eval(assignment) * pi[s];
  }
  for (std::size_t s = 0; s < space.size(); ++s) v[s] /= pi[s];
  return v;
}

} // namespace

std::vector<double> reversed_rates(const Model& model, const TermPtr& closed_component,
                                   const Label& label, const Measure& pi,
                                   std::size_t state_budget) {
  StateSpace space = enumerate_states(model, closed_component, state_budget);
  if (space.size() != pi.values.size())
    throw Error(Error::Kind::precondition,
                "measure has " + std::to_string(pi.values.size()) + " entries but the chain has " +
                    std::to_string(space.size()) + " states");
  for (const auto& arcs : space.arcs)
    for (const Arc& arc : arcs)
      if (arc.rate.is_passive())
        throw Error(Error::Kind::precondition,
                    "component is not closed: passive '" + arc.label + "' transition remains");
  return reversed_on_space(space, {}, label, pi.values);
}

Measure assemble_product(const std::vector<Measure>& measures) {
  Measure out;
  out.values = {1.0};
  out.normalized = true;
  for (const Measure& m : measures) {
    std::vector<double> next(out.values.size() * m.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i)
      for (std::size_t j = 0; j < m.values.size(); ++j)
        next[i * m.values.size() + j] = out.values[i] * m.values[j];
    out.values = std::move(next);
    out.normalized = out.normalized && m.normalized;
  }
  out.residual = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

struct PreparedComponent {
  TermPtr term;
  std::string name;
  StateSpace space;
  GeneratorMatrix gen;
  std::set<Label> active_in_L;
  std::set<Label> passive_in_L;
};

bool contains_coop_term(const TermPtr& term) {
  if (std::holds_alternative<CoopT>(*term)) return true;
  if (auto* cl = std::get_if<ClosureT>(&*term)) return contains_coop_term(cl->body);
  if (auto* ch = std::get_if<ChoiceT>(&*term))
    for (const Branch& b : ch->branches)
      if (contains_coop_term(b.cont)) return true;
  return false;
}

} // namespace

ProductFormSolution solve_product_form(const Model& model, const SystemDef& system,
                                const SolverConfig& config) {
  if (!(config.damping > 0.0 && config.damping <= 1.0))
    throw Error(Error::Kind::precondition, "damping must lie in (0,1]");
  if (!(config.init_kappa > 0.0))
    throw Error(Error::Kind::precondition, "initial rate guess must be positive");
  if (!(config.conv_tol > 0.0) || !(config.check_tol > 0.0) || config.max_iter < 1)
    throw Error(Error::Kind::precondition, "tolerances must be positive and max_iter >= 1");

  const CoopT* co = std::get_if<CoopT>(&*system.term);
  if (!co)
    throw Error(Error::Kind::precondition,
                "system " + system.name + " is not a cooperation of simple processes");
  for (const TermPtr& c : co->components)
    if (contains_coop_term(c))
      throw Error(Error::Kind::precondition,
                  "system " + system.name +
                      " nests cooperations; the product-form solver handles one cooperation " +
                      "of simple processes");

  const std::set<Label> coop_set(co->labels.begin(), co->labels.end());
  ProductFormSolution sol;

  CoopDiagnostics diag = validate_cooperation(model, *co);
  if (!diag.ok()) throw Error(Error::Kind::precondition, diag.errors.front());
  sol.warnings = diag.warnings;

  LabelAnalysis la(model);
  bool forced_violated = false;

  std::vector<PreparedComponent> comps;
  for (const TermPtr& c : co->components) {
    WfReport strict = is_well_formed(model, c, WfMode::strict, config.state_budget);
    if (config.mode == WfMode::strict) {
      if (!strict.ok)
        throw Error(Error::Kind::precondition,
                    "component " + format_term(c) + " is not well-formed: " + strict.witness);
    } else {
      WfReport lenient = is_well_formed(model, c, WfMode::lenient, config.state_budget);
      if (!lenient.ok)
        throw Error(Error::Kind::precondition,
                    "component " + format_term(c) + " is not well-formed: " + lenient.witness);
      if (!strict.ok) {
        // A lenient-only component (repeated passive branches on one label)
        // multiplies joint synchronizations, so the factorization hypothesis
        // fails even when every reversed-rate vector is constant.
        forced_violated = true;
        sol.warnings.push_back("component " + format_term(c) +
                               " passes only the lenient well-formedness check (" +
                               strict.witness + "); product form not guaranteed");
      }
    }
    PreparedComponent pc;
    pc.term = c;
    pc.name = format_term(c);
    for (const Label& a : la.passive(c)) {
      if (!coop_set.count(a))
        throw Error(Error::Kind::unclosable, "component " + pc.name + " has passive label '" + a +
                                                 "' outside the cooperation set; no rate can close it");
      pc.passive_in_L.insert(a);
    }
    for (const Label& a : la.active(c))
      if (coop_set.count(a)) pc.active_in_L.insert(a);
    comps.push_back(std::move(pc));
  }

  std::map<Label, int> owner; // cooperation label -> its unique active owner
  std::set<Label> need_rate;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    for (const Label& a : comps[i].active_in_L) {
      if (owner.count(a))
        throw Error(Error::Kind::internal, "label '" + a + "' has two active owners");
      owner[a] = static_cast<int>(i);
    }
    need_rate.insert(comps[i].passive_in_L.begin(), comps[i].passive_in_L.end());
  }
  for (const Label& a : need_rate)
    if (!owner.count(a))
      throw Error(Error::Kind::unclosable,
                  "cooperation label '" + a +
                      "' has passive users but no active owner; no rate exists to close them");

  for (auto& pc : comps) {
    pc.space = enumerate_states(model, pc.term, config.state_budget);
    pc.gen = build_generator(pc.space);
    SccReport scc = check_irreducible(pc.space, /*include_passive=*/true);
    if (!scc.irreducible)
      throw Error(Error::Kind::reducible,
                  "component " + pc.name + " chain is not irreducible (" +
                      std::to_string(scc.components.size()) + " strongly connected components)");
  }

  std::map<Label, double> kappa;
  for (const auto& [a, i] : owner) {
    (void)i;
    kappa[a] = config.init_kappa;
  }

  std::vector<Measure> measures(comps.size());
  std::vector<bool> have_measure(comps.size(), false);
  auto solve_measures = [&]() {
    for (std::size_t i = 0; i < comps.size(); ++i) {
      if (have_measure[i] && comps[i].passive_in_L.empty()) continue;
      std::map<Label, double> assignment;
      for (const Label& a : comps[i].passive_in_L) assignment[a] = kappa.at(a);
      measures[i] = solve_invariant(evaluate_generator(comps[i].gen, assignment),
                                    /*normalize=*/true, config.dim_budget);
      have_measure[i] = true;
    }
  };
  auto fit = [&]() {
    std::map<Label, double> fitted;
    for (const auto& [a, i] : owner)
      fitted[a] = mean_of(reversed_on_space(comps[i].space, kappa, a, measures[i].values));
    return fitted;
  };
  auto max_rel_change = [&](const std::map<Label, double>& fitted) {
    double delta = 0.0;
    for (const auto& [a, v] : fitted)
      delta = std::max(delta, std::abs(v - kappa.at(a)) / std::max(std::abs(v), 1e-300));
    return delta;
  };

  bool converged = owner.empty();
  for (int it = 0; it < config.max_iter && !converged; ++it) {
    solve_measures();
    std::map<Label, double> fitted = fit();
    ++sol.iterations;
    if (max_rel_change(fitted) < config.conv_tol) {
      kappa = std::move(fitted); // adopt the fitted point undamped
      converged = true;
      break;
    }
    for (const auto& [a, v] : fitted) kappa[a] = config.damping * v + (1.0 - config.damping) * kappa.at(a);
  }

  if (converged && !owner.empty()) {
    // A few undamped rounds polish the fixed point to machine precision.
    for (int round = 0; round < 3; ++round) {
      solve_measures();
      std::map<Label, double> fitted = fit();
      ++sol.iterations;
      double delta = max_rel_change(fitted);
      kappa = std::move(fitted);
      if (delta < 1e-14) break;
    }
  }

  solve_measures();

  bool all_constant = true;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    for (const Label& a : comps[i].active_in_L) {
      ReversedRateCheck check;
      check.component = comps[i].name;
      check.label = a;
      check.values = reversed_on_space(comps[i].space, kappa, a, measures[i].values);
      const auto [mn_it, mx_it] = std::minmax_element(check.values.begin(), check.values.end());
      const double mn = *mn_it, mx = *mx_it, mean = mean_of(check.values);
      if (mean > 1e-100) {
        check.spread = (mx - mn) / mean;
        check.constant = check.spread < config.check_tol;
      } else {
        check.spread = mx - mn;
        check.constant = check.spread < 1e-12;
        check.note = "absolute spread (mean underflow)";
      }
      check.kappa = mean;
      all_constant = all_constant && check.constant;
      sol.checks.push_back(std::move(check));
    }
  }
  for (const ReversedRateCheck& check : sol.checks) sol.kappas[check.label] = check.kappa;

  if (!converged)
    sol.status = SolveStatus::not_converged;
  else if (forced_violated || !all_constant)
    sol.status = SolveStatus::violated;
  else
    sol.status = SolveStatus::satisfied;

  std::size_t product_size = 1;
  for (const auto& pc : comps) {
    if (product_size > config.state_budget / pc.space.size())
      throw Error(Error::Kind::budget, "product space exceeds the state budget");
    product_size *= pc.space.size();
  }
  sol.product = assemble_product(measures);
  for (std::size_t i = 0; i < comps.size(); ++i)
    sol.components.push_back(
        ComponentSolution{comps[i].name, std::move(comps[i].space), std::move(measures[i])});
  return sol;
}

// ---------------------------------------------------------------------------
// Oracle

JointChain build_joint_chain(const std::vector<const StateSpace*>& components,
                             const std::set<Label>& coop_set, std::size_t state_budget) {
  JointChain jc;
  const std::size_t n = components.size();
  jc.dims.resize(n);
  jc.strides.resize(n);
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) {
    jc.dims[k] = components[k]->size();
    if (total > state_budget / jc.dims[k])
      throw Error(Error::Kind::budget, "joint product space exceeds the state budget");
    total *= jc.dims[k];
  }
  jc.size = total;
  for (std::size_t k = n; k-- > 0;)
    jc.strides[k] = (k + 1 == n) ? 1 : jc.strides[k + 1] * jc.dims[k + 1];

  jc.names.resize(total);
  jc.arcs.resize(total);
  std::vector<std::size_t> tup(n, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::string name = "(";
    for (std::size_t k = 0; k < n; ++k) {
      if (k) name += ",";
      name += components[k]->names[tup[k]];
    }
    name += ")";
    jc.names[idx] = std::move(name);

    std::vector<Arc>& out = jc.arcs[idx];
    // Independent moves.
    for (std::size_t k = 0; k < n; ++k) {
      for (const Arc& arc : components[k]->arcs[tup[k]]) {
        if (coop_set.count(arc.label)) continue;
        if (arc.rate.is_passive())
          throw Error(Error::Kind::precondition,
                      "passive label '" + arc.label + "' outside the cooperation set in the joint chain");
        long long t = static_cast<long long>(idx) +
                      (static_cast<long long>(arc.target) - static_cast<long long>(tup[k])) *
                          static_cast<long long>(jc.strides[k]);
        out.push_back(Arc{arc.label, arc.rate, static_cast<int>(t)});
      }
    }
    // Pairwise synchronizations: active mover x distinct passive partner.
    for (const Label& a : coop_set) {
      for (std::size_t k = 0; k < n; ++k) {
        for (const Arc& act : components[k]->arcs[tup[k]]) {
          if (act.label != a || act.rate.is_passive()) continue;
          for (std::size_t k2 = 0; k2 < n; ++k2) {
            if (k2 == k) continue;
            for (const Arc& pas : components[k2]->arcs[tup[k2]]) {
              if (pas.label != a || !pas.rate.is_passive()) continue;
              long long t = static_cast<long long>(idx) +
                            (static_cast<long long>(act.target) - static_cast<long long>(tup[k])) *
                                static_cast<long long>(jc.strides[k]) +
                            (static_cast<long long>(pas.target) - static_cast<long long>(tup[k2])) *
                                static_cast<long long>(jc.strides[k2]);
              out.push_back(Arc{a, act.rate, static_cast<int>(t)});
            }
          }
        }
      }
    }

    // Next tuple (component 1 outermost, last component fastest).
    for (std::size_t k = n; k-- > 0;) {
      if (++tup[k] < jc.dims[k]) break;
      tup[k] = 0;
    }
  }

  jc.reachable.assign(total, 0);
  std::deque<std::size_t> queue;
  jc.reachable[0] = 1;
  queue.push_back(0);
  std::size_t seen = 1;
  while (!queue.empty()) {
    std::size_t s = queue.front();
    queue.pop_front();
    for (const Arc& arc : jc.arcs[s]) {
      if (jc.reachable[arc.target]) continue;
      jc.reachable[arc.target] = 1;
      ++seen;
      queue.push_back(arc.target);
    }
  }
  jc.reachable_all = seen == total;
  return jc;
}

OracleReport verify_against_joint(const Model& model, const SystemDef& system,
                                  const ProductFormSolution& solution, std::size_t state_budget,
                                  std::size_t dim_budget) {
  (void)model;
  const CoopT* co = std::get_if<CoopT>(&*system.term);
  if (!co)
    throw Error(Error::Kind::precondition,
                "system " + system.name + " is not a cooperation of simple processes");
  const std::set<Label> coop_set(co->labels.begin(), co->labels.end());

  std::vector<const StateSpace*> spaces;
  spaces.reserve(solution.components.size());
  for (const ComponentSolution& c : solution.components) spaces.push_back(&c.space);
  JointChain jc = build_joint_chain(spaces, coop_set, state_budget);

  OracleReport rep;
  rep.joint_states = jc.size;
  rep.reachable_equals_product = jc.reachable_all;
  if (jc.size > dim_budget)
    throw Error(Error::Kind::budget, "joint dimension " + std::to_string(jc.size) +
                                         " exceeds the solve budget " + std::to_string(dim_budget));

  std::vector<std::vector<double>> q(jc.size, std::vector<double>(jc.size, 0.0));
  for (std::size_t i = 0; i < jc.size; ++i)
    for (const Arc& arc : jc.arcs[i]) {
      if (arc.target == static_cast<int>(i)) continue;
      const double r = arc.rate.value();
      q[i][arc.target] += r;
      q[i][i] -= r;
    }
  for (const auto& row : q)
    for (double v : row) rep.max_q = std::max(rep.max_q, std::abs(v));

  const std::vector<double>& prod = solution.product.values;
  if (prod.size() != jc.size)
    throw Error(Error::Kind::internal, "product vector length does not match the joint space");
  for (std::size_t j = 0; j < jc.size; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < jc.size; ++i) s += prod[i] * q[i][j];
    rep.product_residual = std::max(rep.product_residual, std::abs(s));
  }

  SccReport scc = strongly_connected(jc.arcs, false);
  rep.joint_irreducible = scc.irreducible;
  std::vector<double> joint_pi(jc.size, 0.0);
  if (scc.irreducible) {
    Measure m = solve_invariant(q, /*normalize=*/true, dim_budget);
    joint_pi = m.values;
    rep.solved = true;
  } else {
    // The stationary distribution is still unique when exactly one terminal
    // class is reachable from the initial tuple: all mass ends up there.
    std::vector<int> scc_of(jc.size, -1);
    for (std::size_t c = 0; c < scc.components.size(); ++c)
      for (int s : scc.components[c]) scc_of[s] = static_cast<int>(c);
    std::vector<char> terminal(scc.components.size(), 1);
    for (std::size_t s = 0; s < jc.size; ++s)
      for (const Arc& arc : jc.arcs[s])
        if (scc_of[arc.target] != scc_of[s]) terminal[scc_of[s]] = 0;
    std::vector<int> candidates;
    for (std::size_t c = 0; c < scc.components.size(); ++c) {
      if (!terminal[c]) continue;
      bool reachable = false;
      for (int s : scc.components[c]) reachable = reachable || jc.reachable[s];
      if (reachable) candidates.push_back(static_cast<int>(c));
    }
    if (candidates.size() == 1) {
      const std::vector<int>& cls = scc.components[candidates.front()];
      std::vector<std::vector<double>> sub(cls.size(), std::vector<double>(cls.size(), 0.0));
      for (std::size_t i = 0; i < cls.size(); ++i)
        for (std::size_t j = 0; j < cls.size(); ++j) sub[i][j] = q[cls[i]][cls[j]];
      Measure m = solve_invariant(sub, /*normalize=*/true, dim_budget);
      for (std::size_t i = 0; i < cls.size(); ++i) joint_pi[cls[i]] = m.values[i];
      rep.solved = true;
      rep.note = "joint chain reducible; stationary distribution supported on the single "
                 "reachable terminal class (" +
                 std::to_string(cls.size()) + " of " + std::to_string(jc.size) + " states)";
    } else {
      rep.solved = false;
      rep.note = "joint chain reducible with " + std::to_string(candidates.size()) +
                 " reachable terminal classes; no unique stationary distribution";
    }
  }

  if (rep.solved) {
    double gap_abs = 0.0, gap_rel = 0.0;
    for (std::size_t s = 0; s < jc.size; ++s) {
      const double d = std::abs(prod[s] - joint_pi[s]);
      gap_abs = std::max(gap_abs, d);
      const double denom = std::max(std::abs(joint_pi[s]), std::abs(prod[s]));
      if (denom > 0.0) gap_rel = std::max(gap_rel, d / denom);
    }
    rep.gap_abs = gap_abs;
    rep.gap_rel = gap_rel;
  } else {
    rep.gap_abs = std::numeric_limits<double>::quiet_NaN();
    rep.gap_rel = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

} // namespace sspa
