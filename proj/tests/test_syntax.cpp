#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sspa/syntax.hpp"

#include "support.hpp"

#include <cmath>

using namespace sspa;
using testsupport::bundled_models;
using testsupport::load_model;

TEST_CASE("model files parse into constants, equations, and systems") {
  Model m = parse_model(R"(
    // a two-state toggle cooperating with itself on halt
    let speed = 2.5;
    On  = (run, speed).Off + (halt, ?).On;
    Off = (wake, 1.0).On;
    system Toggle = coop {halt} (On, Off);
  )");

  CHECK(m.constants.at("speed") == 2.5);
  REQUIRE(m.equation_order == std::vector<std::string>{"On", "Off"});

  const auto& on = std::get<ChoiceT>(*m.equation("On"));
  REQUIRE(on.branches.size() == 2);
  CHECK(on.branches[0].label == "run");
  CHECK(on.branches[0].rate == RateSpec::constant(2.5)); // `let` already expanded
  CHECK(on.branches[1].rate == RateSpec::passive());
  CHECK(std::get<IdentT>(*on.branches[1].cont).name == "On");

  REQUIRE(m.systems.size() == 1);
  const SystemDef* sys = m.find_system("Toggle");
  REQUIRE(sys != nullptr);
  const auto& co = std::get<CoopT>(*sys->term);
  CHECK(co.labels == std::vector<Label>{"halt"});
  CHECK(co.components.size() == 2);
  CHECK(m.find_system("Nope") == nullptr);
  CHECK(m.find_equation("Nope") == nullptr);
  CHECK_THROWS_AS(m.equation("Nope"), Error);
}

TEST_CASE("nil is a term of its own") {
  Model m = parse_model("Z = 0; A = (stop, 1.0).Z + (stop, 2.0).0;");
  CHECK(std::holds_alternative<NilT>(*m.equation("Z")));
  const auto& a = std::get<ChoiceT>(*m.equation("A"));
  CHECK(std::holds_alternative<IdentT>(*a.branches[0].cont));
  CHECK(std::holds_alternative<NilT>(*a.branches[1].cont));
}

TEST_CASE("terms render back to source syntax") {
  TermPtr ch = choice({Branch{"a", RateSpec::constant(1.0), ident("A")},
                       Branch{"b", RateSpec::passive(), nil()}});
  CHECK(format_term(ch) == "(a,1).A + (b,?).0");
  CHECK(format_term(closure(ident("A"), "b", 3.0)) == "A[b <- 3]");
  CHECK(format_term(closure(closure(ident("A"), "a", 1.0), "b", 2.0)) == "A[a <- 1][b <- 2]");
  // A non-identifier closure body needs its own parentheses to re-parse.
  CHECK(format_term(closure(ch, "b", 0.5)) == "((a,1).A + (b,?).0)[b <- 0.5]");
  CHECK(format_term(coop({"a", "c"}, {ident("E0"), ident("C0")})) == "coop {a,c} (E0, C0)");
  CHECK(format_term(coop({}, {ident("P0"), ident("Q0")})) == "coop {} (P0, Q0)");
}

TEST_CASE("parse and format round-trip on every bundled equation and system") {
  for (const auto& bm : bundled_models()) {
    CAPTURE(bm.file);
    Model m = desugar(load_model(bm.file));
    for (const auto& name : m.equation_order) {
      const std::string text = format_term(m.equation(name));
      CHECK(format_term(parse_query(m, text)) == text);
    }
    for (const auto& sys : m.systems) {
      const std::string text = format_term(sys.term);
      CHECK(format_term(parse_query(m, text)) == text);
    }
  }
}

TEST_CASE("desugaring introduces deterministic synthetic states") {
  Model m = parse_model("A = (a, 1.0).(b, 2.0).(c, 3.0).A;");
  Model d = desugar(m);
  REQUIRE(d.equation_order == std::vector<std::string>{"A", "A#1", "A#2"});
  CHECK(format_term(d.equation("A")) == "(a,1).A#1");
  CHECK(format_term(d.equation("A#1")) == "(b,2).A#2");
  CHECK(format_term(d.equation("A#2")) == "(c,3).A");
}

TEST_CASE("desugaring flattens compound continuations in place") {
  Model m = parse_model("P = (a, 1.0).((b, 2.0).P + (c, ?).P);");
  Model d = desugar(m);
  REQUIRE(d.equation_order == std::vector<std::string>{"P", "P#1"});
  CHECK(format_term(d.equation("P")) == "(a,1).P#1");
  CHECK(format_term(d.equation("P#1")) == "(b,2).P + (c,?).P");
}

TEST_CASE("desugaring is idempotent") {
  for (const auto& bm : bundled_models()) {
    CAPTURE(bm.file);
    Model once = desugar(load_model(bm.file));
    Model twice = desugar(once);
    REQUIRE(twice.equation_order == once.equation_order);
    for (const auto& name : once.equation_order)
      CHECK(format_term(twice.equation(name)) == format_term(once.equation(name)));
  }
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_model("A = (a, 1.0).A\nB = (b, 2.0).B;");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::parse);
    CHECK(e.line == 2); // the missing ';' surfaces at the next definition
    CHECK(e.column >= 1);
  }
}

TEST_CASE("duplicate definitions are rejected") {
  try {
    parse_model("A = (a, 1.0).A; A = (b, 2.0).A;");
    FAIL("expected a name error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::name);
  }
}

TEST_CASE("undefined identifiers are rejected at the end of the file") {
  try {
    parse_model("A = (a, 1.0).B;");
    FAIL("expected a name error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::name);
    CHECK(std::string(e.what()).find("'B'") != std::string::npos);
  }
}

TEST_CASE("rates must be positive") {
  try {
    parse_model("A = (a, 0.0).A;");
    FAIL("expected a rate error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::rate);
  }
  try {
    parse_model("let r = 0.0;");
    FAIL("expected a rate error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::rate);
  }
  // A bare `0` in a rate position is the nil keyword, not a number; either
  // way it never becomes a rate.
  CHECK_THROWS_AS(parse_model("let r = 0;"), Error);
  CHECK_THROWS_AS(parse_model("A = (a, -1.0).A;"), Error);
}

TEST_CASE("unknown constants are rejected") {
  try {
    parse_model("A = (a, warp).A;");
    FAIL("expected a name error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::name);
  }
}

TEST_CASE("queries parse against the model environment") {
  Model m = load_model("cycle.sspa");

  TermPtr q = parse_query(m, "A0[b <- 3.0]");
  CHECK(format_term(q) == "A0[b <- 3]");
  // `let` constants from the model resolve inside query rates.
  CHECK(format_term(parse_query(m, "A0[b <- mu]")) == "A0[b <- 2]");

  TermPtr co = parse_query(m, "coop {a} (A0, A2)");
  CHECK(std::holds_alternative<CoopT>(*co));

  CHECK(format_term(parse_query(m, "(a, 1.0).A0 + (b, ?).0")) == "(a,1).A0 + (b,?).0");
  CHECK(format_term(parse_query(m, "A1;")) == "A1"); // a trailing ';' is tolerated

  try {
    parse_query(m, "Bogus[b <- 1.0]");
    FAIL("expected a name error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::name);
  }
  try {
    parse_query(m, "A0 A1");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind == Error::Kind::parse);
  }
}

TEST_CASE("format_number prints shortest round-trip decimals") {
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(2.5) == "2.5");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-3.0) == "-3");
  for (double v : {1.0 / 3.0, 0.512, 1e30, 1e-30, 123456.789, 5.55e-17})
    CHECK(std::stod(format_number(v)) == v);
}
