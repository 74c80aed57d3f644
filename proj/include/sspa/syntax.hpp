#pragma once

// Process terms, the textual model format, and the normalization pass that
// brings sugared terms into the strict grammar
//
//   E ::= 0 | Idf
//   M ::= sum_i (a_i, r_i) . E_i  |  M[a <- lambda]
//
// Cooperation terms (`coop {L} (M1, ..., Mn)`) live in the same tree so that
// joint states and nested cooperations flow through every downstream pass.

#include "sspa/error.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace sspa {

using Label = std::string;

/// A prefix rate: a positive real, or the passive variable indexed by the
/// prefix's own label (written `?` in model files).
class RateSpec {
public:
  static RateSpec constant(double value) { return RateSpec{false, value}; }
  static RateSpec passive() { return RateSpec{true, 0.0}; }

  bool is_passive() const { return passive_; }
  bool is_const() const { return !passive_; }
  double value() const { return value_; }

  friend bool operator==(const RateSpec& a, const RateSpec& b) {
    return a.passive_ == b.passive_ && (a.passive_ || a.value_ == b.value_);
  }

  /// Total order used by canonical forms: constants by value, passive last.
  friend bool operator<(const RateSpec& a, const RateSpec& b) {
    if (a.passive_ != b.passive_) return !a.passive_;
    if (a.passive_) return false;
    return a.value_ < b.value_;
  }

private:
  RateSpec(bool passive, double value) : passive_(passive), value_(value) {}
  bool passive_;
  double value_;
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Branch {
  Label label;
  RateSpec rate;
  TermPtr cont;
};

struct NilT {};
struct IdentT {
  std::string name;
};
struct ChoiceT {
  std::vector<Branch> branches; // nonempty; a multiset, duplicates meaningful
};
struct ClosureT {
  TermPtr body;
  Label label;
  double rate; // > 0
};
struct CoopT {
  std::vector<Label> labels; // cooperation set L, sorted, unique
  std::vector<TermPtr> components;
};

struct Term : std::variant<NilT, IdentT, ChoiceT, ClosureT, CoopT> {
  using variant::variant;
};

TermPtr nil();
TermPtr ident(std::string name);
TermPtr choice(std::vector<Branch> branches);
TermPtr closure(TermPtr body, Label label, double rate);
TermPtr coop(std::vector<Label> labels, std::vector<TermPtr> components);

struct SystemDef {
  std::string name;
  TermPtr term; // always a CoopT
};

/// An identifier-equation environment plus the declared cooperating systems.
struct Model {
  std::map<std::string, TermPtr> equations;
  std::vector<std::string> equation_order; // source order, synthetics appended
  std::vector<SystemDef> systems;
  std::map<std::string, double> constants; // `let` bindings, already expanded

  const TermPtr* find_equation(const std::string& name) const;
  const SystemDef* find_system(const std::string& name) const;

  /// Equation body for `name`; throws Error::Kind::name if undefined.
  const TermPtr& equation(const std::string& name) const;
};

/// Parse the `.sspa` model format. Terms may still carry sugar (nested
/// prefixes, compound continuations); run desugar() before the semantics.
Model parse_model(const std::string& text);

/// Normalize every equation to the strict grammar: each prefix continuation
/// becomes 0 or an identifier, with deterministic synthetic equations
/// (`A0#1`, `A0#2`, ...) for intermediate states. Idempotent.
Model desugar(const Model& model);

/// Render a term back to model syntax. parse_model(format_term(t) + ";")
/// recovers a term structurally congruent to t for desugared simple terms.
std::string format_term(const TermPtr& term);

/// Shortest decimal string that round-trips the double.
std::string format_number(double v);

/// Parse a standalone query term against an existing model: the full term and
/// system grammar is accepted (e.g. "A0[b <- 0.5]" or "coop {a} (A1, A2)"),
/// identifiers must name equations of `model`, and `let` constants resolve as
/// rates. Compound continuations stay nested; the semantics treats them as
/// anonymous states named by their own text.
TermPtr parse_query(const Model& model, const std::string& text);

} // namespace sspa
