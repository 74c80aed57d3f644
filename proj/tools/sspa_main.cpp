// Command-line front end: check | lts | solve | verify | bisim.
//
// Exit codes
//   0  success (check passed / solve satisfied / verify agreement / bisimilar)
//   1  domain failure (ill-formed model, unclosable component, reducible
//      chain, not bisimilar, ...)
//   2  parse or name errors (bad model text, unknown identifier, bad usage)
//   3  state or dimension budget exceeded
//   4  solve: product-form hypothesis violated
//   5  solve/verify: fixed point did not converge
//   6  verify: solver verdict and oracle disagree

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "sspa/json_out.hpp"
#include "sspa/prodform.hpp"

namespace {

using namespace sspa;

struct Options {
  std::string file;
  std::string format = "text";
  std::string mode = "strict";
  std::size_t budget = 100000;

  WfMode wf_mode() const { return mode == "lenient" ? WfMode::lenient : WfMode::strict; }
};

int exit_for(const Error& e) {
  switch (e.kind) {
    case Error::Kind::parse:
    case Error::Kind::name:
    case Error::Kind::rate: return 2;
    case Error::Kind::budget: return 3;
    default: return 1;
  }
}

std::size_t env_budget() {
  const char* s = std::getenv("SSPA_BUDGET_STATES");
  if (!s || !*s) return 100000;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0' || v == 0)
    throw Error(Error::Kind::parse, "SSPA_BUDGET_STATES must be a positive integer");
  return static_cast<std::size_t>(v);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Error::Kind::parse, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rate_str(const RateSpec& rate) {
  return rate.is_passive() ? "?" : format_number(rate.value());
}

std::string set_str(const std::set<Label>& labels) {
  std::string out = "{";
  for (const Label& a : labels) {
    if (out.size() > 1) out += ", ";
    out += a;
  }
  return out + "}";
}

// Resolves a name argument: a defined system, or else an inline query term.
TermPtr term_for(const Model& model, const std::string& name) {
  if (const SystemDef* sys = model.find_system(name)) return sys->term;
  return parse_query(model, name);
}

// ---------------------------------------------------------------------------
// check

int cmd_check(const Options& o) {
  Model model = parse_model(read_file(o.file));
  LabelAnalysis la(model);

  struct ProcRow {
    std::string name;
    std::set<Label> active, passive, unique;
    bool closed = false;
    WfReport wf;
  };
  struct SysRow {
    std::string name;
    std::string text;
    CoopDiagnostics diag;
  };
  std::vector<ProcRow> procs;
  std::vector<SysRow> systems;
  bool ok = true;

  for (const std::string& name : model.equation_order) {
    ProcRow row;
    row.name = name;
    TermPtr term = ident(name);
    row.active = la.active(term);
    row.passive = la.passive(term);
    row.unique = la.unique_passive(term);
    row.closed = is_closed(model, term);
    row.wf = is_well_formed(model, term, o.wf_mode(), o.budget);
    ok = ok && row.wf.ok;
    procs.push_back(std::move(row));
  }
  for (const SystemDef& sys : model.systems) {
    SysRow row;
    row.name = sys.name;
    row.text = format_term(sys.term);
    if (auto* co = std::get_if<CoopT>(&*sys.term)) row.diag = validate_cooperation(model, *co);
    ok = ok && row.diag.ok();
    systems.push_back(std::move(row));
  }

  if (o.format == "json") {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value(1);
    w.key("file").value(o.file);
    w.key("mode").value(o.mode);
    w.key("processes").begin_array();
    for (const ProcRow& p : procs) {
      w.begin_object();
      w.key("name").value(p.name);
      w.key("active").begin_array();
      for (const Label& a : p.active) w.value(a);
      w.end_array();
      w.key("passive").begin_array();
      for (const Label& a : p.passive) w.value(a);
      w.end_array();
      w.key("unique_passive").begin_array();
      for (const Label& a : p.unique) w.value(a);
      w.end_array();
      w.key("closed").value(p.closed);
      w.key("well_formed").value(p.wf.ok);
      w.key("witness").value(p.wf.witness);
      w.end_object();
    }
    w.end_array();
    w.key("systems").begin_array();
    for (const SysRow& s : systems) {
      w.begin_object();
      w.key("name").value(s.name);
      w.key("term").value(s.text);
      w.key("valid").value(s.diag.ok());
      w.key("errors").begin_array();
      for (const std::string& e : s.diag.errors) w.value(e);
      w.end_array();
      w.key("warnings").begin_array();
      for (const std::string& m : s.diag.warnings) w.value(m);
      w.end_array();
      w.end_object();
    }
    w.end_array();
    w.key("ok").value(ok);
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    for (const ProcRow& p : procs) {
      std::cout << "process " << p.name << "\n"
                << "  active = " << set_str(p.active) << "\n"
                << "  passive = " << set_str(p.passive) << "\n"
                << "  unique-passive = " << set_str(p.unique) << "\n"
                << "  closed = " << (p.closed ? "yes" : "no") << "\n"
                << "  well-formed (" << o.mode << ") = " << (p.wf.ok ? "yes" : "no") << "\n";
      if (!p.wf.ok) std::cout << "    " << p.wf.witness << "\n";
    }
    for (const SysRow& s : systems) {
      std::cout << "system " << s.name << " = " << s.text << "\n"
                << "  valid = " << (s.diag.ok() ? "yes" : "no") << "\n";
      for (const std::string& e : s.diag.errors) std::cout << "  error: " << e << "\n";
      for (const std::string& m : s.diag.warnings) std::cout << "  warning: " << m << "\n";
    }
    std::cout << "check: " << (ok ? "ok" : "failed") << "\n";
  }
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// lts

void write_dot(const StateSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Error::Kind::precondition, "cannot write '" + path + "'");
  out << "digraph lts {\n  rankdir=LR;\n";
  out << "  \"" << space.names[0] << "\" [shape=doublecircle];\n";
  for (std::size_t s = 0; s < space.size(); ++s)
    for (const Arc& arc : space.arcs[s])
      out << "  \"" << space.names[s] << "\" -> \"" << space.names[arc.target] << "\" [label=\""
          << arc.label << "," << rate_str(arc.rate) << "\"];\n";
  out << "}\n";
}

int cmd_lts(const Options& o, const std::string& query, const std::string& dot_path, bool matrix) {
  Model model = desugar(parse_model(read_file(o.file)));
  StateSpace space = enumerate_states(model, term_for(model, query), o.budget);

  if (!dot_path.empty()) write_dot(space, dot_path);

  if (matrix) {
    GeneratorMatrix g = build_generator(space);
    if (o.format == "json") {
      JsonWriter w;
      w.begin_object();
      w.key("schema").value(1);
      w.key("states").begin_array();
      for (const std::string& n : space.names) w.value(n);
      w.end_array();
      w.key("q").begin_array();
      for (std::size_t i = 0; i < g.n; ++i) {
        w.begin_array();
        for (std::size_t j = 0; j < g.n; ++j) {
          RateExpr e = g.entry(static_cast<int>(i), static_cast<int>(j));
          if (e.numeric())
            w.value(e.num);
          else
            w.value(e.str());
        }
        w.end_array();
      }
      w.end_array();
      w.end_object();
      std::cout << w.str() << "\n";
    } else {
      std::cout << generator_text(g);
    }
    return 0;
  }

  if (o.format == "json") {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value(1);
    w.key("initial").value(space.names[0]);
    w.key("states").begin_array();
    for (const std::string& n : space.names) w.value(n);
    w.end_array();
    w.key("transitions").begin_array();
    for (std::size_t s = 0; s < space.size(); ++s) {
      const auto& arcs = space.arcs[s];
      for (std::size_t i = 0; i < arcs.size();) {
        std::size_t j = i;
        while (j < arcs.size() && arcs[j].label == arcs[i].label && arcs[j].rate == arcs[i].rate &&
               arcs[j].target == arcs[i].target)
          ++j;
        w.begin_object();
        w.key("from").value(space.names[s]);
        w.key("label").value(arcs[i].label);
        w.key("rate");
        if (arcs[i].rate.is_passive())
          w.null();
        else
          w.value(arcs[i].rate.value());
        w.key("to").value(space.names[arcs[i].target]);
        w.key("multiplicity").value(j - i);
        w.end_object();
        i = j;
      }
    }
    w.end_array();
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    for (std::size_t s = 0; s < space.size(); ++s)
      for (const Arc& arc : space.arcs[s])
        std::cout << space.names[s] << " --" << arc.label << "," << rate_str(arc.rate) << "--> "
                  << space.names[arc.target] << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// solve / verify

std::vector<std::string> product_names(const ProductFormSolution& sol) {
  std::vector<std::string> names = {""};
  for (const ComponentSolution& c : sol.components) {
    std::vector<std::string> next;
    next.reserve(names.size() * c.space.size());
    for (const std::string& prefix : names)
      for (const std::string& n : c.space.names)
        next.push_back(prefix.empty() ? n : prefix + "," + n);
    names = std::move(next);
  }
  for (std::string& n : names) n = "(" + n + ")";
  return names;
}

void emit_solution_json(const ProductFormSolution& sol, const OracleReport* oracle,
                        const bool* agreement) {
  JsonWriter w;
  w.begin_object();
  w.key("schema").value(1);
  w.key("status").value(to_string(sol.status));
  w.key("kappas").begin_object();
  for (const auto& [label, value] : sol.kappas) w.key(label).value(value);
  w.end_object();
  w.key("components").begin_array();
  for (const ComponentSolution& c : sol.components) {
    w.begin_object();
    w.key("name").value(c.name);
    w.key("states").begin_array();
    for (const std::string& n : c.space.names) w.value(n);
    w.end_array();
    w.key("pi").begin_array();
    for (double v : c.pi.values) w.value(v);
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("product").begin_object();
  w.key("states").begin_array();
  for (const std::string& n : product_names(sol)) w.value(n);
  w.end_array();
  w.key("pi").begin_array();
  for (double v : sol.product.values) w.value(v);
  w.end_array();
  w.end_object();
  w.key("oracle");
  if (oracle) {
    w.begin_object();
    w.key("gap_abs").value(oracle->gap_abs);
    w.key("gap_rel").value(oracle->gap_rel);
    w.key("reachable_equals_product").value(oracle->reachable_equals_product);
    w.key("joint_irreducible").value(oracle->joint_irreducible);
    w.key("solved").value(oracle->solved);
    w.key("product_residual").value(oracle->product_residual);
    w.key("max_q").value(oracle->max_q);
    w.key("joint_states").value(oracle->joint_states);
    w.key("note").value(oracle->note);
    w.end_object();
  } else {
    w.null();
  }
  w.key("iterations").value(sol.iterations);
  w.key("residuals").begin_object();
  w.key("components").begin_array();
  for (const ComponentSolution& c : sol.components) w.value(c.pi.residual);
  w.end_array();
  w.end_object();
  w.key("checks").begin_array();
  for (const ReversedRateCheck& c : sol.checks) {
    w.begin_object();
    w.key("component").value(c.component);
    w.key("label").value(c.label);
    w.key("mean").value(c.kappa);
    w.key("spread").value(c.spread);
    w.key("constant").value(c.constant);
    w.key("note").value(c.note);
    w.end_object();
  }
  w.end_array();
  w.key("warnings").begin_array();
  for (const std::string& m : sol.warnings) w.value(m);
  w.end_array();
  if (agreement) w.key("agreement").value(*agreement);
  w.end_object();
  std::cout << w.str() << "\n";
}

void emit_solution_text(const ProductFormSolution& sol, const OracleReport* oracle,
                        const bool* agreement) {
  std::cout << "status: " << to_string(sol.status) << "\n";
  std::cout << "iterations: " << sol.iterations << "\n";
  for (const std::string& m : sol.warnings) std::cout << "warning: " << m << "\n";
  for (const auto& [label, value] : sol.kappas)
    std::cout << "kappa " << label << " = " << format_number(value) << "\n";
  std::cout << "reversed-rate checks:\n";
  for (const ReversedRateCheck& c : sol.checks) {
    std::cout << "  " << c.component << " / " << c.label << ": mean = " << format_number(c.kappa)
              << ", spread = " << format_number(c.spread) << ", constant = "
              << (c.constant ? "yes" : "no");
    if (!c.note.empty()) std::cout << " (" << c.note << ")";
    std::cout << "\n";
  }
  for (const ComponentSolution& c : sol.components) {
    std::cout << "component " << c.name << " (" << c.space.size() << " states)\n";
    for (std::size_t s = 0; s < c.space.size(); ++s)
      std::cout << "  pi(" << c.space.names[s] << ") = " << format_number(c.pi.values[s]) << "\n";
  }
  std::vector<std::string> names = product_names(sol);
  std::cout << "product (" << names.size() << " states)\n";
  for (std::size_t s = 0; s < names.size(); ++s)
    std::cout << "  pi" << names[s] << " = " << format_number(sol.product.values[s]) << "\n";
  if (oracle) {
    std::cout << "oracle:\n"
              << "  joint states = " << oracle->joint_states << "\n"
              << "  reachable covers product = "
              << (oracle->reachable_equals_product ? "yes" : "no") << "\n"
              << "  joint irreducible = " << (oracle->joint_irreducible ? "yes" : "no") << "\n"
              << "  solved = " << (oracle->solved ? "yes" : "no") << "\n"
              << "  gap_abs = " << format_number(oracle->gap_abs) << "\n"
              << "  gap_rel = " << format_number(oracle->gap_rel) << "\n"
              << "  product residual = " << format_number(oracle->product_residual)
              << " (max |Q| = " << format_number(oracle->max_q) << ")\n";
    if (!oracle->note.empty()) std::cout << "  note: " << oracle->note << "\n";
  }
  if (agreement)
    std::cout << "verdict: " << (*agreement ? "agreement" : "INCONSISTENT") << "\n";
}

int cmd_solve(const Options& o, const std::string& system_name, SolverConfig cfg,
              bool with_oracle) {
  Model model = desugar(parse_model(read_file(o.file)));
  const SystemDef* sys = model.find_system(system_name);
  if (!sys) throw Error(Error::Kind::name, "unknown system '" + system_name + "'");

  cfg.mode = o.wf_mode();
  cfg.state_budget = o.budget;
  ProductFormSolution sol = solve_product_form(model, *sys, cfg);

  std::optional<OracleReport> oracle;
  std::optional<bool> agreement;
  if (with_oracle && sol.status != SolveStatus::not_converged) {
    oracle = verify_against_joint(model, *sys, sol, cfg.state_budget, cfg.dim_budget);
    if (oracle->solved) {
      agreement = sol.status == SolveStatus::satisfied
                      ? oracle->product_residual <= 1e-8 * oracle->max_q
                      : oracle->gap_rel > 10 * cfg.check_tol;
    } else {
      agreement = false; // nothing to certify against
    }
  }

  const OracleReport* orep = oracle ? &*oracle : nullptr;
  const bool* agr = agreement ? &*agreement : nullptr;
  if (o.format == "json")
    emit_solution_json(sol, orep, agr);
  else
    emit_solution_text(sol, orep, agr);

  if (sol.status == SolveStatus::not_converged) return 5;
  if (with_oracle) return *agreement ? 0 : 6;
  return sol.status == SolveStatus::satisfied ? 0 : 4;
}

// ---------------------------------------------------------------------------
// bisim

int cmd_bisim(const Options& o, const std::string& lhs, const std::string& rhs, bool witness) {
  Model model = desugar(parse_model(read_file(o.file)));
  BisimResult r = strong_bisimilar(model, term_for(model, lhs), term_for(model, rhs), o.budget);

  if (o.format == "json") {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value(1);
    w.key("lhs").value(lhs);
    w.key("rhs").value(rhs);
    w.key("bisimilar").value(r.bisimilar);
    w.key("states").value(r.states);
    if (witness) {
      w.key("blocks").begin_array();
      for (const auto& block : r.blocks) {
        w.begin_array();
        for (const std::string& n : block) w.value(n);
        w.end_array();
      }
      w.end_array();
    }
    w.end_object();
    std::cout << w.str() << "\n";
  } else {
    std::cout << lhs << (r.bisimilar ? " ≅ " : " ≇ ") << rhs << "\n";
    if (witness) {
      std::cout << "partition (" << r.blocks.size() << " blocks over " << r.states
                << " states):\n";
      for (const auto& block : r.blocks) {
        std::cout << "  {";
        for (std::size_t i = 0; i < block.size(); ++i)
          std::cout << (i ? ", " : " ") << block[i];
        std::cout << " }\n";
      }
    }
  }
  return r.bisimilar ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSPA toolkit: semantics, well-formedness, CTMC generators, and the "
               "product-form solver for cooperating stochastic automata"};
  app.require_subcommand(1);

  Options o;
  try {
    o.budget = env_budget();
  } catch (const Error& e) {
    std::cerr << "sspa: error: " << e.what() << "\n";
    return 2;
  }

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("file", o.file, "model file (.sspa)")->required();
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    cmd->add_option("--mode", o.mode, "well-formedness mode")
        ->check(CLI::IsMember({"strict", "lenient"}))
        ->capture_default_str();
    cmd->add_option("--budget-states", o.budget, "state-space budget")->capture_default_str();
  };

  CLI::App* check = app.add_subcommand("check", "label sets, closure, and well-formedness report");
  add_common(check);

  CLI::App* lts = app.add_subcommand("lts", "labelled transition system dump");
  add_common(lts);
  std::string query;
  std::string dot_path;
  bool matrix = false;
  lts->add_option("name", query, "process/system name or inline term, e.g. 'A0[b <- 0.5]'")
      ->required();
  lts->add_option("--dot", dot_path, "also write a DOT graph to this path");
  lts->add_flag("--matrix", matrix, "emit the generator matrix instead of transitions");

  SolverConfig cfg;
  std::string system_name;
  auto add_solver = [&](CLI::App* cmd) {
    add_common(cmd);
    cmd->add_option("system", system_name, "system name")->required();
    cmd->add_option("--damping", cfg.damping, "update weight on freshly fitted rates")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    cmd->add_option("--tol-conv", cfg.conv_tol, "fixed-point convergence tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--tol-check", cfg.check_tol, "reversed-rate constancy tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--max-iter", cfg.max_iter, "iteration cap")
        ->check(CLI::Range(1, 1000000))
        ->capture_default_str();
  };
  CLI::App* solve = app.add_subcommand("solve", "product-form solve of a cooperation system");
  add_solver(solve);
  CLI::App* verify =
      app.add_subcommand("verify", "solve, then check against a direct joint-chain solve");
  add_solver(verify);

  CLI::App* bisim = app.add_subcommand("bisim", "strong bisimilarity of two processes or systems");
  add_common(bisim);
  std::string lhs, rhs;
  bool witness = false;
  bisim->add_option("lhs", lhs, "process/system name or inline term")->required();
  bisim->add_option("rhs", rhs, "process/system name or inline term")->required();
  bisim->add_flag("--witness", witness, "print the partition blocks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(check)) return cmd_check(o);
    if (app.got_subcommand(lts)) return cmd_lts(o, query, dot_path, matrix);
    if (app.got_subcommand(solve)) return cmd_solve(o, system_name, cfg, /*with_oracle=*/false);
    if (app.got_subcommand(verify)) return cmd_solve(o, system_name, cfg, /*with_oracle=*/true);
    if (app.got_subcommand(bisim)) return cmd_bisim(o, lhs, rhs, witness);
  } catch (const Error& e) {
    std::cerr << "sspa: error: " << e.what();
    if (e.line > 0) std::cerr << " (line " << e.line << ", column " << e.column << ")";
    std::cerr << "\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "sspa: internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
