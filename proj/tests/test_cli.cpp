#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end runs of the command-line binary: exit codes, output formats, and
// determinism. Everything here shells out to the real executable.

#include "support.hpp"

#include <cstdio>
#include <fstream>

using testsupport::bundled_models;
using testsupport::json_bool;
using testsupport::json_number;
using testsupport::model_path;
using testsupport::run_cli;
using testsupport::run_sh;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

} // namespace

TEST_CASE("every bundled model passes check under its documented mode") {
  for (const auto& bm : bundled_models()) {
    CAPTURE(bm.file);
    auto r = run_cli("check " + model_path(bm.file) + " --mode " + bm.mode);
    CHECK(r.status == 0);
  }
}

TEST_CASE("check rejects what its mode cannot admit") {
  CHECK(run_cli("check " + model_path("cycle.sspa")).status == 1); // strict default
  CHECK(run_cli("check " + model_path("negative/blocked_pair.sspa") + " --mode lenient").status ==
        1); // a label clash is fatal in any mode
}

TEST_CASE("check emits stable JSON diagnostics") {
  const std::string args = "check " + model_path("bio.sspa") + " --format json";
  auto r1 = run_cli(args, /*merge_stderr=*/false);
  auto r2 = run_cli(args, /*merge_stderr=*/false);
  CHECK(r1.status == 0);
  CHECK(r1.out == r2.out);
  CHECK(r1.out.find("\"name\": \"E0\"") != std::string::npos);
  CHECK(r1.out.find("\"well_formed\": true") != std::string::npos);
  CHECK(json_bool(r1.out, "ok"));
}

TEST_CASE("lts prints one transition per line") {
  auto r = run_cli("lts " + model_path("cycle.sspa") + " A0", /*merge_stderr=*/false);
  CHECK(r.status == 0);
  CHECK(r.out ==
        "A0 --a,1--> A1\n"
        "A1 --b,?--> A2\n"
        "A2 --a,2--> A3\n"
        "A3 --b,?--> A0\n");
}

TEST_CASE("lts resolves closure queries and exports the numeric generator") {
  auto r = run_cli("lts " + model_path("cycle.sspa") + " \"A0[b <- 3]\" --matrix",
                   /*merge_stderr=*/false);
  CHECK(r.status == 0);
  CHECK(r.out ==
        "-1 1 0 0\n"
        "0 -3 3 0\n"
        "0 0 -2 2\n"
        "3 0 0 -3\n");
}

TEST_CASE("lts keeps unclosed generators symbolic") {
  auto r = run_cli("lts " + model_path("passive_choice.sspa") + " M --matrix",
                   /*merge_stderr=*/false);
  CHECK(r.status == 0);
  CHECK(r.out ==
        "-2x_a x_a x_a\n"
        "1 -1 0\n"
        "x_c 0 -x_c\n");

  auto j = run_cli("lts " + model_path("passive_choice.sspa") + " M --matrix --format json",
                   /*merge_stderr=*/false);
  CHECK(j.status == 0);
  CHECK(j.out.find("\"-2x_a\"") != std::string::npos);
  CHECK(j.out.find("\"q\"") != std::string::npos);
}

TEST_CASE("lts JSON lists transitions with multiplicities") {
  auto r = run_cli("lts " + model_path("bio.sspa") + " E0 --format json",
                   /*merge_stderr=*/false);
  CHECK(r.status == 0);
  CHECK(r.out.find("\"initial\": \"E0\"") != std::string::npos);
  CHECK(r.out.find("\"multiplicity\": 1") != std::string::npos);
  // Passive rates travel as null.
  auto t = run_cli("lts " + model_path("bio.sspa") + " T0 --format json",
                   /*merge_stderr=*/false);
  CHECK(t.out.find("\"rate\": null") != std::string::npos);
}

TEST_CASE("lts writes DOT files on request") {
  const std::string dot = "/tmp/sspa_cli_cycle.dot";
  std::remove(dot.c_str());
  auto r = run_cli("lts " + model_path("cycle.sspa") + " A0 --dot " + dot);
  CHECK(r.status == 0);
  std::string text = testsupport::read_file(dot);
  CHECK(text.find("digraph") != std::string::npos);
  CHECK(text.find("doublecircle") != std::string::npos); // the initial state
  CHECK(text.find("A3") != std::string::npos);
  std::remove(dot.c_str());
}

TEST_CASE("solve reports the reference system as satisfied") {
  auto r = run_cli("solve " + model_path("bio.sspa") + " Bio", /*merge_stderr=*/false);
  CHECK(r.status == 0);
  CHECK(r.out.find("status: satisfied") != std::string::npos);
  CHECK(r.out.find("kappa a = 2") != std::string::npos);
  CHECK(r.out.find("kappa c = 2") != std::string::npos);

  const std::string args = "solve " + model_path("bio.sspa") + " Bio --format json";
  auto j1 = run_cli(args, /*merge_stderr=*/false);
  auto j2 = run_cli(args, /*merge_stderr=*/false);
  CHECK(j1.status == 0);
  CHECK(j1.out == j2.out); // byte-identical across runs
  CHECK(j1.out.find("\"status\": \"satisfied\"") != std::string::npos);
  CHECK(json_number(j1.out, "a") == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(json_number(j1.out, "iterations") > 0);
}

TEST_CASE("solve distinguishes violated hypotheses by exit code") {
  CHECK(run_cli("solve " + model_path("bio_spoiled.sspa") + " Bio").status == 4);
  auto lenient =
      run_cli("solve " + model_path("bio_doubled_trigger.sspa") + " Bio --mode lenient");
  CHECK(lenient.status == 4);
  CHECK(lenient.out.find("warning:") != std::string::npos);
  // Strict mode refuses the same system outright.
  CHECK(run_cli("solve " + model_path("bio_doubled_trigger.sspa") + " Bio").status == 1);
}

TEST_CASE("solve reports non-convergence when starved of iterations") {
  auto r = run_cli("solve " + model_path("bio.sspa") + " Bio --max-iter 1");
  CHECK(r.status == 5);
  CHECK(r.out.find("not_converged") != std::string::npos);
}

TEST_CASE("verify agrees with the oracle on positive and negative cases") {
  auto good = run_cli("verify " + model_path("bio.sspa") + " Bio --format json",
                      /*merge_stderr=*/false);
  CHECK(good.status == 0);
  CHECK(json_bool(good.out, "agreement"));
  CHECK(json_bool(good.out, "solved"));
  CHECK(json_number(good.out, "gap_abs") < 1e-9);
  CHECK(json_number(good.out, "joint_states") == 16);

  // A violated verdict agrees when the joint solve shows a real gap.
  auto bad = run_cli("verify " + model_path("bio_spoiled.sspa") + " Bio --format json",
                     /*merge_stderr=*/false);
  CHECK(bad.status == 0);
  CHECK(json_bool(bad.out, "agreement"));
  CHECK(json_number(bad.out, "gap_abs") > 1e-3);

  auto text = run_cli("verify " + model_path("bio.sspa") + " Bio", /*merge_stderr=*/false);
  CHECK(text.out.find("verdict: agreement") != std::string::npos);
}

TEST_CASE("bisim certifies association-order inequivalence") {
  const std::string file = model_path("counterexample.sspa");
  auto same = run_cli("bisim " + file + " Sys1 Z", /*merge_stderr=*/false);
  CHECK(same.status == 0);
  CHECK(same.out == "Sys1 ≅ Z\n");

  auto diff = run_cli("bisim " + file + " Sys2 Z --witness", /*merge_stderr=*/false);
  CHECK(diff.status == 1);
  CHECK(diff.out.find("Sys2 ≇ Z") != std::string::npos);
  CHECK(diff.out.find("partition (") != std::string::npos);

  auto j = run_cli("bisim " + file + " Sys2 Z --witness --format json",
                   /*merge_stderr=*/false);
  CHECK(j.out.find("\"bisimilar\": false") != std::string::npos);
  CHECK(j.out.find("\"blocks\"") != std::string::npos);
}

TEST_CASE("bisim accepts query terms for both sides") {
  auto r = run_cli("bisim " + model_path("counterexample.sspa") +
                   " \"coop {a} (A2, A3)\" Z");
  CHECK(r.status == 0); // both deadlock immediately
}

TEST_CASE("bad input maps to exit 2") {
  CHECK(run_cli("solve " + model_path("bio.sspa") + " NoSuchSystem").status == 2);
  CHECK(run_cli("check /tmp/definitely_missing.sspa").status == 2);
  CHECK(run_cli("lts " + model_path("bio.sspa") + " Bogus").status == 2);

  const std::string bad = write_temp("sspa_cli_bad.sspa", "A = (a, 1.0).A\n");
  auto r = run_cli("check " + bad);
  CHECK(r.status == 2);
  CHECK(r.out.find("line") != std::string::npos);
  std::remove(bad.c_str());
}

TEST_CASE("usage errors map to exit 2 and help to exit 0") {
  CHECK(run_cli("").status == 2);
  CHECK(run_cli("frobnicate x").status == 2);
  CHECK(run_cli("check " + model_path("bio.sspa") + " --mode sloppy").status == 2);
  CHECK(run_cli("solve " + model_path("bio.sspa") + " Bio --damping 0").status == 2);
  CHECK(run_cli("--help").status == 0);
  CHECK(run_cli("solve --help").status == 0);
}

TEST_CASE("state budgets come from the flag or the environment") {
  CHECK(run_cli("lts " + model_path("bio.sspa") + " E0 --budget-states 1").status == 3);
  CHECK(run_sh(std::string("SSPA_BUDGET_STATES=1 ") + SSPA_BIN + " lts " +
               model_path("bio.sspa") + " E0 2>&1")
            .status == 3);
  // The flag overrides the environment.
  CHECK(run_sh(std::string("SSPA_BUDGET_STATES=1 ") + SSPA_BIN + " lts " +
               model_path("bio.sspa") + " E0 --budget-states 100 2>&1")
            .status == 0);
  CHECK(run_sh(std::string("SSPA_BUDGET_STATES=banana ") + SSPA_BIN + " lts " +
               model_path("bio.sspa") + " E0 2>&1")
            .status == 2);
}
