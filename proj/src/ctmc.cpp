#include "sspa/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace sspa {

RateExpr& RateExpr::operator+=(const RateExpr& other) {
  num += other.num;
  for (const auto& [label, coeff] : other.vars) {
    double& c = vars[label];
    c += coeff;
    if (c == 0.0) vars.erase(label);
  }
  return *this;
}

RateExpr RateExpr::operator-() const {
  RateExpr out;
  out.num = -num;
  for (const auto& [label, coeff] : vars) out.vars[label] = -coeff;
  return out;
}

double RateExpr::eval(const std::map<Label, double>& assignment) const {
  double v = num;
  for (const auto& [label, coeff] : vars) {
    auto it = assignment.find(label);
    if (it == assignment.end())
      throw Error(Error::Kind::assignment, "no rate assigned to label '" + label + "'");
    v += coeff * it->second;
  }
  return v;
}

std::string RateExpr::str() const {
  std::string out;
  auto append = [&](double coeff, const std::string& symbol) {
    if (coeff == 0.0) return;
    const bool negative = coeff < 0;
    const double mag = std::abs(coeff);
    if (out.empty())
      out += negative ? "-" : "";
    else
      out += negative ? " - " : " + ";
    if (symbol.empty())
      out += format_number(mag);
    else
      out += (mag == 1.0 ? "" : format_number(mag)) + symbol;
  };
  for (const auto& [label, coeff] : vars) append(coeff, "x_" + label);
  append(num, "");
  return out.empty() ? "0" : out;
}

RateExpr RateExpr::constant(double v) {
  RateExpr out;
  out.num = v;
  return out;
}

RateExpr RateExpr::variable(const Label& label, double coeff) {
  RateExpr out;
  if (coeff != 0.0) out.vars[label] = coeff;
  return out;
}

RateExpr RateExpr::of(const RateSpec& rate, const Label& label) {
  return rate.is_passive() ? variable(label) : constant(rate.value());
}

StateSpace enumerate_states(const Model& model, const TermPtr& initial, std::size_t budget) {
  StateSpace space;
  std::deque<int> queue;
  auto intern = [&](const TermPtr& term) {
    std::string name = format_term(term);
    auto it = space.index.find(name);
    if (it != space.index.end()) return it->second;
    if (space.size() >= budget)
      throw Error(Error::Kind::budget,
                  "state budget exceeded (" + std::to_string(budget) + " states)");
    int id = static_cast<int>(space.size());
    space.states.push_back(term);
    space.names.push_back(std::move(name));
    space.index.emplace(space.names.back(), id);
    queue.push_back(id);
    return id;
  };
  intern(canonicalize(model, resolve_state(model, initial)));
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop_front();
    std::vector<Arc> arcs;
    for (const Transition& t : derive_transitions(model, space.states[id])) {
      int target = intern(canonicalize(model, resolve_state(model, t.target)));
      arcs.push_back(Arc{t.label, t.rate, target});
    }
    if (static_cast<std::size_t>(id) >= space.arcs.size()) space.arcs.resize(id + 1);
    space.arcs[id] = std::move(arcs);
  }
  space.arcs.resize(space.size());
  return space;
}

RateExpr rate_total(const StateSpace& space, int from, int to) {
  if (from == to)
    throw Error(Error::Kind::precondition, "q(C -> C) is undefined: self-loop rates are ignored");
  RateExpr sum;
  for (const Arc& arc : space.arcs.at(from))
    if (arc.target == to) sum += RateExpr::of(arc.rate, arc.label);
  return sum;
}

RateExpr rate_labelled(const StateSpace& space, int from, int to, const Label& label) {
  RateExpr sum;
  for (const Arc& arc : space.arcs.at(from))
    if (arc.target == to && arc.label == label) sum += RateExpr::of(arc.rate, arc.label);
  return sum;
}

RateExpr GeneratorMatrix::entry(int i, int j) const {
  if (i == j) return diag.at(i);
  const auto& row = off.at(i);
  auto it = row.find(j);
  return it == row.end() ? RateExpr{} : it->second;
}

GeneratorMatrix build_generator(const StateSpace& space) {
  GeneratorMatrix g;
  g.n = space.size();
  g.off.resize(g.n);
  g.diag.resize(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    RateExpr row_sum;
    for (const Arc& arc : space.arcs[i]) {
      if (arc.target == static_cast<int>(i)) continue; // self-loop rates are ignored
      RateExpr r = RateExpr::of(arc.rate, arc.label);
      g.off[i][arc.target] += r;
      row_sum += r;
    }
    g.diag[i] = -row_sum;
  }
  return g;
}

std::vector<std::vector<double>> evaluate_generator(const GeneratorMatrix& g,
                                                    const std::map<Label, double>& assignment) {
  std::vector<std::vector<double>> q(g.n, std::vector<double>(g.n, 0.0));
  for (std::size_t i = 0; i < g.n; ++i) {
    for (const auto& [j, expr] : g.off[i]) q[i][j] = expr.eval(assignment);
    q[i][i] = g.diag[i].eval(assignment);
  }
  return q;
}

SccReport strongly_connected(const std::vector<std::vector<Arc>>& arcs, bool include_passive) {
  const int n = static_cast<int>(arcs.size());
  // Iterative Tarjan; components are emitted in completion order.
  SccReport report;
  std::vector<int> order(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  int counter = 0;

  struct Frame {
    int v;
    std::size_t arc;
  };
  for (int root = 0; root < n; ++root) {
    if (order[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    order[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.arc < arcs[f.v].size()) {
        const Arc& arc = arcs[f.v][f.arc++];
        if (arc.rate.is_passive() && !include_passive) continue;
        int w = arc.target;
        if (order[w] == -1) {
          order[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back(Frame{w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], order[w]);
        }
      } else {
        if (low[f.v] == order[f.v]) {
          std::vector<int> scc;
          for (;;) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            scc.push_back(w);
            if (w == f.v) break;
          }
          std::sort(scc.begin(), scc.end());
          report.components.push_back(std::move(scc));
        }
        int v = f.v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
  report.irreducible = report.components.size() == 1;
  return report;
}

SccReport check_irreducible(const StateSpace& space, bool include_passive) {
  return strongly_connected(space.arcs, include_passive);
}

Measure solve_invariant(const std::vector<std::vector<double>>& q, bool normalize,
                        std::size_t dim_budget) {
  const std::size_t n = q.size();
  if (n == 0) throw Error(Error::Kind::precondition, "empty generator");
  if (n > dim_budget)
    throw Error(Error::Kind::budget, "solve dimension " + std::to_string(n) +
                                         " exceeds budget " + std::to_string(dim_budget));
  for (const auto& row : q)
    if (row.size() != n) throw Error(Error::Kind::precondition, "generator is not square");

  // pi Q = 0  <=>  Q^T pi^T = 0; the last equation is replaced by sum(pi) = 1.
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  double scale = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = q[j][i];
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
  a[n - 1][n] = 1.0;
  for (const auto& row : q)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12 * scale)
      throw Error(Error::Kind::reducible,
                  "singular balance system: the chain is reducible or degenerate");
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double factor = a[r][col] / a[col][col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= factor * a[col][c];
    }
  }

  Measure m;
  m.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.values[i] = a[i][n] / a[i][i];
  m.normalized = true;
  if (!normalize) {
    const double base = m.values.back();
    if (base != 0.0)
      for (double& v : m.values) v /= base;
    m.normalized = false;
  }
  double residual = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m.values[i] * q[i][j];
    residual = std::max(residual, std::abs(s));
  }
  m.residual = residual;
  return m;
}

std::string generator_text(const GeneratorMatrix& g) {
  std::string out;
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      if (j) out += " ";
      out += g.entry(static_cast<int>(i), static_cast<int>(j)).str();
    }
    out += "\n";
  }
  return out;
}

std::string generator_text(const std::vector<std::vector<double>>& q) {
  std::string out;
  for (const auto& row : q) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += " ";
      out += format_number(row[j]);
    }
    out += "\n";
  }
  return out;
}

} // namespace sspa
