#include "sspa/semantics.hpp"

#include <algorithm>
#include <deque>

namespace sspa {

namespace {

bool transition_less(const Transition& a, const Transition& b) {
  if (a.label != b.label) return a.label < b.label;
  if (a.rate < b.rate) return true;
  if (b.rate < a.rate) return false;
  return format_term(a.target) < format_term(b.target);
}

// Table 1 + Table 2 derivation. `unfolding` tracks the chain of identifier
// unfoldings that has not yet reached a choice or 0, to reject definitions
// like P = Q[a <- 1]; Q = P[b <- 2].
class Deriver {
public:
  explicit Deriver(const Model& model) : model_(model) {}

  std::vector<Transition> run(const TermPtr& term) {
    std::vector<Transition> out;
    collect(term, out);
    std::sort(out.begin(), out.end(), transition_less);
    return out;
  }

private:
  void collect(const TermPtr& term, std::vector<Transition>& out) {
    if (std::holds_alternative<NilT>(*term)) return;
    if (auto* id = std::get_if<IdentT>(&*term)) {
      if (!unfolding_.insert(id->name).second)
        throw Error(Error::Kind::ill_founded,
                    "ill-founded definition: unfolding '" + id->name +
                        "' never reaches a choice or 0");
      collect(model_.equation(id->name), out);
      unfolding_.erase(id->name);
      return;
    }
    if (auto* ch = std::get_if<ChoiceT>(&*term)) {
      for (const Branch& b : ch->branches) out.push_back(Transition{b.label, b.rate, b.cont});
      return;
    }
    if (auto* cl = std::get_if<ClosureT>(&*term)) {
      std::vector<Transition> inner;
      collect(cl->body, inner);
      for (Transition& t : inner) {
        RateSpec rate = (t.label == cl->label && t.rate.is_passive())
                            ? RateSpec::constant(cl->rate)
                            : t.rate;
        out.push_back(Transition{t.label, rate, closure(t.target, cl->label, cl->rate)});
      }
      return;
    }
    const auto& co = std::get<CoopT>(*term);
    std::vector<std::vector<Transition>> per_comp;
    per_comp.reserve(co.components.size());
    for (const TermPtr& comp : co.components) per_comp.push_back(Deriver(model_).run(comp));
    const std::set<Label> coop_set(co.labels.begin(), co.labels.end());

    auto joint = [&](std::size_t i, const TermPtr& ti) {
      std::vector<TermPtr> comps = co.components;
      comps[i] = ti;
      return coop(co.labels, std::move(comps));
    };
    auto joint2 = [&](std::size_t i, const TermPtr& ti, std::size_t k, const TermPtr& tk) {
      std::vector<TermPtr> comps = co.components;
      comps[i] = ti;
      comps[k] = tk;
      return coop(co.labels, std::move(comps));
    };

    // Independent moves: labels outside the cooperation set.
    for (std::size_t i = 0; i < per_comp.size(); ++i)
      for (const Transition& t : per_comp[i])
        if (!coop_set.count(t.label))
          out.push_back(Transition{t.label, t.rate, joint(i, t.target)});

    // Cooperation: strictly pairwise, one active mover and one distinct
    // passive partner; the joint rate is the active one. Anything else
    // (two actives, two passives, a lone mover) is blocked.
    for (const Label& a : co.labels) {
      for (std::size_t i = 0; i < per_comp.size(); ++i) {
        for (const Transition& act : per_comp[i]) {
          if (act.label != a || act.rate.is_passive()) continue;
          for (std::size_t k = 0; k < per_comp.size(); ++k) {
            if (k == i) continue;
            for (const Transition& pas : per_comp[k]) {
              if (pas.label != a || !pas.rate.is_passive()) continue;
              out.push_back(
                  Transition{a, act.rate, joint2(i, act.target, k, pas.target)});
            }
          }
        }
      }
    }
  }

  const Model& model_;
  std::set<std::string> unfolding_;
};

} // namespace

std::vector<Transition> derive_transitions(const Model& model, const TermPtr& term) {
  return Deriver(model).run(term);
}

TermPtr canonicalize(const Model& model, const TermPtr& term) {
  if (std::holds_alternative<NilT>(*term) || std::holds_alternative<IdentT>(*term)) return term;
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    std::vector<Branch> branches;
    branches.reserve(ch->branches.size());
    for (const Branch& b : ch->branches)
      branches.push_back(Branch{b.label, b.rate, canonicalize(model, b.cont)});
    std::sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
      if (a.label != b.label) return a.label < b.label;
      if (a.rate < b.rate) return true;
      if (b.rate < a.rate) return false;
      return format_term(a.cont) < format_term(b.cont);
    });
    return choice(std::move(branches));
  }
  if (auto* cl = std::get_if<ClosureT>(&*term))
    return closure(canonicalize(model, cl->body), cl->label, cl->rate);
  const auto& co = std::get<CoopT>(*term);
  std::vector<TermPtr> comps;
  comps.reserve(co.components.size());
  for (const TermPtr& c : co.components) comps.push_back(canonicalize(model, c));
  return coop(co.labels, std::move(comps));
}

namespace {

// An equation whose body is not a choice (e.g. Cc = C0[a <- 2]) is an alias:
// a re-entered state carries the body's shape, never the alias name, so both
// spellings must intern to the same state. Unfolds such identifiers, also
// inside closure spines and cooperation slots.
TermPtr resolve_state_rec(const Model& model, const TermPtr& term,
                          std::set<std::string>& unfolding) {
  if (auto* id = std::get_if<IdentT>(&*term)) {
    const TermPtr& body = model.equation(id->name);
    if (std::holds_alternative<ChoiceT>(*body)) return term;
    if (!unfolding.insert(id->name).second)
      throw Error(Error::Kind::ill_founded, "ill-founded definition: unfolding '" + id->name +
                                                "' never reaches a choice or 0");
    TermPtr resolved = resolve_state_rec(model, body, unfolding);
    unfolding.erase(id->name);
    return resolved;
  }
  if (auto* cl = std::get_if<ClosureT>(&*term)) {
    TermPtr body = resolve_state_rec(model, cl->body, unfolding);
    return body == cl->body ? term : closure(std::move(body), cl->label, cl->rate);
  }
  if (auto* co = std::get_if<CoopT>(&*term)) {
    std::vector<TermPtr> comps;
    comps.reserve(co->components.size());
    bool changed = false;
    for (const TermPtr& c : co->components) {
      comps.push_back(resolve_state_rec(model, c, unfolding));
      changed = changed || comps.back() != c;
    }
    return changed ? coop(co->labels, std::move(comps)) : term;
  }
  return term;
}

} // namespace

TermPtr resolve_state(const Model& model, const TermPtr& term) {
  std::set<std::string> unfolding;
  return resolve_state_rec(model, term, unfolding);
}

// ---------------------------------------------------------------------------
// Label sets

namespace {

// Labels appearing anywhere in a term, including closure and cooperation-set
// labels.
void syntactic_labels(const TermPtr& term, std::set<Label>& out) {
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    for (const Branch& b : ch->branches) {
      out.insert(b.label);
      syntactic_labels(b.cont, out);
    }
  } else if (auto* cl = std::get_if<ClosureT>(&*term)) {
    out.insert(cl->label);
    syntactic_labels(cl->body, out);
  } else if (auto* co = std::get_if<CoopT>(&*term)) {
    out.insert(co->labels.begin(), co->labels.end());
    for (const TermPtr& c : co->components) syntactic_labels(c, out);
  }
}

} // namespace

LabelAnalysis::LabelAnalysis(const Model& model) : model_(&model) {
  for (const auto& name : model.equation_order)
    syntactic_labels(model.equations.at(name), universe_);
  for (const SystemDef& sys : model.systems) syntactic_labels(sys.term, universe_);

  // A and P: least fixpoints from the empty set.
  for (const auto& name : model.equation_order) {
    active_[name] = {};
    passive_[name] = {};
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& name : model.equation_order) {
      auto a = eval_active(model.equations.at(name));
      auto p = eval_passive(model.equations.at(name));
      if (a != active_[name]) {
        active_[name] = std::move(a);
        changed = true;
      }
      if (p != passive_[name]) {
        passive_[name] = std::move(p);
        changed = true;
      }
    }
  }

  // U: greatest fixpoint from the full label universe.
  for (const auto& name : model.equation_order) unique_[name] = universe_;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& name : model.equation_order) {
      auto u = eval_unique(model.equations.at(name));
      if (u != unique_[name]) {
        unique_[name] = std::move(u);
        changed = true;
      }
    }
  }
}

std::set<Label> LabelAnalysis::eval_active(const TermPtr& term) const {
  std::set<Label> out;
  if (auto* id = std::get_if<IdentT>(&*term)) {
    auto it = active_.find(id->name);
    return it == active_.end() ? out : it->second;
  }
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    for (const Branch& b : ch->branches) {
      if (b.rate.is_const()) out.insert(b.label);
      auto sub = eval_active(b.cont);
      out.insert(sub.begin(), sub.end());
    }
    return out;
  }
  if (auto* cl = std::get_if<ClosureT>(&*term)) {
    out = eval_active(cl->body);
    out.insert(cl->label);
    return out;
  }
  if (auto* co = std::get_if<CoopT>(&*term)) {
    // Not defined for interacting processes in the source algebra; the union
    // over components is used for cooperation diagnostics only.
    for (const TermPtr& c : co->components) {
      auto sub = eval_active(c);
      out.insert(sub.begin(), sub.end());
    }
    return out;
  }
  return out; // Nil
}

std::set<Label> LabelAnalysis::eval_passive(const TermPtr& term) const {
  std::set<Label> out;
  if (auto* id = std::get_if<IdentT>(&*term)) {
    auto it = passive_.find(id->name);
    return it == passive_.end() ? out : it->second;
  }
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    for (const Branch& b : ch->branches) {
      if (b.rate.is_passive()) out.insert(b.label);
      auto sub = eval_passive(b.cont);
      out.insert(sub.begin(), sub.end());
    }
    return out;
  }
  if (auto* cl = std::get_if<ClosureT>(&*term)) {
    out = eval_passive(cl->body);
    out.erase(cl->label);
    return out;
  }
  if (auto* co = std::get_if<CoopT>(&*term)) {
    for (const TermPtr& c : co->components) {
      auto sub = eval_passive(c);
      out.insert(sub.begin(), sub.end());
    }
    return out;
  }
  return out; // Nil
}

std::set<Label> LabelAnalysis::eval_unique(const TermPtr& term) const {
  if (std::holds_alternative<NilT>(*term)) return universe_;
  if (auto* id = std::get_if<IdentT>(&*term)) {
    auto it = unique_.find(id->name);
    return it == unique_.end() ? universe_ : it->second;
  }
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    // A passive label with two structurally different continuations is not
    // unique and empties the whole set.
    std::map<Label, std::set<std::string>> passive_conts;
    for (const Branch& b : ch->branches)
      if (b.rate.is_passive()) passive_conts[b.label].insert(format_term(b.cont));
    for (const auto& [label, conts] : passive_conts)
      if (conts.size() > 1) return {};
    std::set<Label> here;
    for (const Branch& b : ch->branches) here.insert(b.label);
    std::set<Label> meet = here;
    for (const Branch& b : ch->branches) {
      std::set<Label> sub = eval_unique(b.cont);
      std::set<Label> next;
      std::set_intersection(meet.begin(), meet.end(), sub.begin(), sub.end(),
                            std::inserter(next, next.begin()));
      meet = std::move(next);
    }
    return meet;
  }
  if (auto* cl = std::get_if<ClosureT>(&*term)) {
    auto out = eval_unique(cl->body);
    out.erase(cl->label);
    return out;
  }
  return universe_; // interacting processes: unused, neutral value
}

std::set<Label> LabelAnalysis::active(const TermPtr& term) const { return eval_active(term); }
std::set<Label> LabelAnalysis::passive(const TermPtr& term) const { return eval_passive(term); }
std::set<Label> LabelAnalysis::unique_passive(const TermPtr& term) const {
  return eval_unique(term);
}

std::set<Label> active_labels(const Model& model, const TermPtr& term) {
  return LabelAnalysis(model).active(term);
}
std::set<Label> passive_labels(const Model& model, const TermPtr& term) {
  return LabelAnalysis(model).passive(term);
}
std::set<Label> unique_passive_labels(const Model& model, const TermPtr& term) {
  return LabelAnalysis(model).unique_passive(term);
}

bool is_closed(const Model& model, const TermPtr& term, bool literal_active_reading) {
  LabelAnalysis la(model);
  return literal_active_reading ? la.active(term).empty() : la.passive(term).empty();
}

// ---------------------------------------------------------------------------
// Exploration (shared by lenient well-formedness and bisimilarity)

namespace {

struct Explored {
  std::vector<TermPtr> states;
  std::vector<std::string> names;
  std::map<std::string, int> index;
  std::vector<std::vector<Transition>> transitions;
};

Explored explore(const Model& model, const std::vector<TermPtr>& roots, std::size_t budget) {
  Explored ex;
  std::deque<int> queue;
  auto intern = [&](const TermPtr& term) {
    std::string name = format_term(term);
    auto it = ex.index.find(name);
    if (it != ex.index.end()) return it->second;
    if (ex.states.size() >= budget)
      throw Error(Error::Kind::budget,
                  "state budget exceeded (" + std::to_string(budget) + " states)");
    int id = static_cast<int>(ex.states.size());
    ex.states.push_back(term);
    ex.names.push_back(std::move(name));
    ex.index.emplace(ex.names.back(), id);
    queue.push_back(id);
    return id;
  };
  for (const TermPtr& root : roots) intern(canonicalize(model, resolve_state(model, root)));
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    std::vector<Transition> ts = derive_transitions(model, ex.states[id]);
    for (Transition& t : ts) {
      t.target = canonicalize(model, resolve_state(model, t.target));
      intern(t.target);
    }
    if (static_cast<std::size_t>(id) >= ex.transitions.size()) ex.transitions.resize(id + 1);
    ex.transitions[id] = std::move(ts);
  }
  ex.transitions.resize(ex.states.size());
  return ex;
}

} // namespace

WfReport is_well_formed(const Model& model, const TermPtr& term, WfMode mode,
                        std::size_t state_budget) {
  LabelAnalysis la(model);
  auto active = la.active(term);
  auto passive = la.passive(term);
  std::set<Label> overlap;
  std::set_intersection(active.begin(), active.end(), passive.begin(), passive.end(),
                        std::inserter(overlap, overlap.begin()));
  if (!overlap.empty())
    return WfReport{false, "condition 1 violated: label '" + *overlap.begin() +
                               "' is both active and passive"};
  if (passive.empty()) return WfReport{};

  if (mode == WfMode::strict) {
    auto unique = la.unique_passive(term);
    if (passive != unique) {
      std::string witness = "condition 2 violated: passive labels {";
      bool first = true;
      for (const Label& l : passive) {
        if (!first) witness += ",";
        first = false;
        witness += l;
      }
      witness += "} differ from unique-passive labels {";
      first = true;
      for (const Label& l : unique) {
        if (!first) witness += ",";
        first = false;
        witness += l;
      }
      witness += "}";
      return WfReport{false, witness};
    }
    return WfReport{};
  }

  // Lenient: at most one distinct passive label may leave any reachable state.
  Explored ex = explore(model, {term}, state_budget);
  for (std::size_t s = 0; s < ex.states.size(); ++s) {
    std::set<Label> passive_here;
    for (const Transition& t : ex.transitions[s])
      if (t.rate.is_passive()) passive_here.insert(t.label);
    if (passive_here.size() > 1)
      return WfReport{false, "lenient condition violated: state " + ex.names[s] + " offers " +
                                 std::to_string(passive_here.size()) +
                                 " distinct passive labels"};
  }
  return WfReport{};
}

// ---------------------------------------------------------------------------
// Cooperation validation

namespace {

bool contains_coop(const TermPtr& term) {
  if (std::holds_alternative<CoopT>(*term)) return true;
  if (auto* cl = std::get_if<ClosureT>(&*term)) return contains_coop(cl->body);
  if (auto* ch = std::get_if<ChoiceT>(&*term))
    for (const Branch& b : ch->branches)
      if (contains_coop(b.cont)) return true;
  return false;
}

std::string join_labels(const std::set<Label>& labels) {
  std::string out;
  for (const Label& l : labels) {
    if (!out.empty()) out += ",";
    out += l;
  }
  return out;
}

void validate_node(const LabelAnalysis& la, const CoopT& co, bool top_level,
                   CoopDiagnostics& diag) {
  const std::set<Label> coop_set(co.labels.begin(), co.labels.end());
  const std::size_t n = co.components.size();
  std::vector<std::set<Label>> act(n), pas(n);
  std::vector<bool> nested(n);
  for (std::size_t i = 0; i < n; ++i) {
    act[i] = la.active(co.components[i]);
    pas[i] = la.passive(co.components[i]);
    nested[i] = contains_coop(co.components[i]);
  }

  auto clash = [&](const std::vector<std::set<Label>>& sets, std::size_t i, std::size_t j) {
    std::set<Label> common;
    std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                          std::inserter(common, common.begin()));
    std::set<Label> bad;
    std::set_intersection(common.begin(), common.end(), coop_set.begin(), coop_set.end(),
                          std::inserter(bad, bad.begin()));
    return bad;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      auto bad_active = clash(act, i, j);
      auto bad_passive = clash(pas, i, j);
      // Pairs involving a nested cooperation fall outside the simple-process
      // disjointness condition; demote to warnings so such systems stay
      // runnable for transition-level analysis.
      const bool hard = top_level && !nested[i] && !nested[j];
      auto report = [&](const std::set<Label>& labels, const char* kind) {
        if (labels.empty()) return;
        std::string msg = std::string(kind) + " labels {" + join_labels(labels) +
                          "} shared by cooperating components " +
                          format_term(co.components[i]) + " and " +
                          format_term(co.components[j]);
        if (hard)
          diag.errors.push_back(std::move(msg));
        else
          diag.warnings.push_back(std::move(msg));
      };
      report(bad_active, "active");
      report(bad_passive, "passive");
    }
  }

  for (const Label& a : co.labels) {
    bool any_active = false, any_passive = false;
    for (std::size_t i = 0; i < n; ++i) {
      any_active = any_active || act[i].count(a) > 0;
      any_passive = any_passive || pas[i].count(a) > 0;
    }
    if (!any_active || !any_passive)
      diag.warnings.push_back("cooperation label '" + a + "' is blocked (" +
                              (any_active ? "no passive owner" : "no active owner") + ")");
  }

  for (const TermPtr& comp : co.components)
    if (auto* sub = std::get_if<CoopT>(&*comp)) validate_node(la, *sub, false, diag);
}

} // namespace

CoopDiagnostics validate_cooperation(const Model& model, const CoopT& coop) {
  CoopDiagnostics diag;
  LabelAnalysis la(model);
  validate_node(la, coop, true, diag);
  return diag;
}

TermPtr apply_closure(const TermPtr& term, const Label& label, double rate) {
  return closure(term, label, rate);
}

TermPtr apply_closure_set(const TermPtr& term, const std::map<Label, double>& assignment) {
  TermPtr out = term;
  for (const auto& [label, rate] : assignment) out = closure(out, label, rate);
  return out;
}

// ---------------------------------------------------------------------------
// Strong bisimilarity

BisimResult strong_bisimilar(const Model& model, const TermPtr& lhs, const TermPtr& rhs,
                             std::size_t state_budget) {
  Explored ex = explore(model, {lhs, rhs}, state_budget);
  const int lhs_id = ex.index.at(format_term(canonicalize(model, resolve_state(model, lhs))));
  const int rhs_id = ex.index.at(format_term(canonicalize(model, resolve_state(model, rhs))));
  const std::size_t n = ex.states.size();

  // Resolve targets to indices once; (label, rate) pairs are matched
  // existentially, so per-state moves collapse to a set.
  std::vector<std::vector<std::tuple<Label, bool, double, int>>> moves(n);
  for (std::size_t s = 0; s < n; ++s)
    for (const Transition& t : ex.transitions[s])
      moves[s].emplace_back(t.label, t.rate.is_passive(),
                            t.rate.is_passive() ? 0.0 : t.rate.value(),
                            ex.index.at(format_term(t.target)));

  std::vector<int> block(n, 0);
  int blocks = 1;
  for (;;) {
    std::map<std::vector<std::tuple<Label, bool, double, int>>, int> sig_block;
    std::vector<int> next(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::set<std::tuple<Label, bool, double, int>> sig_set;
      for (const auto& [label, pass, rate, target] : moves[s])
        sig_set.emplace(label, pass, rate, block[target]);
      std::vector<std::tuple<Label, bool, double, int>> sig(sig_set.begin(), sig_set.end());
      sig.emplace_back("", false, 0.0, block[s]); // split only within old blocks
      auto [it, inserted] = sig_block.emplace(std::move(sig), static_cast<int>(sig_block.size()));
      next[s] = it->second;
      (void)inserted;
    }
    int next_blocks = static_cast<int>(sig_block.size());
    bool stable = next_blocks == blocks;
    block = std::move(next);
    blocks = next_blocks;
    if (stable) break;
  }

  BisimResult result;
  result.bisimilar = block[lhs_id] == block[rhs_id];
  result.states = n;
  std::map<int, std::vector<std::string>> grouped;
  for (std::size_t s = 0; s < n; ++s) grouped[block[s]].push_back(ex.names[s]);
  std::vector<std::pair<int, std::vector<std::string>>> ordered(grouped.begin(), grouped.end());
  std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    return ex.index.at(a.second.front()) < ex.index.at(b.second.front());
  });
  for (auto& [id, names] : ordered) result.blocks.push_back(std::move(names));
  return result;
}

} // namespace sspa
