#include "sspa/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace sspa {

TermPtr nil() {
  static const TermPtr n = std::make_shared<Term>(NilT{});
  return n;
}

TermPtr ident(std::string name) { return std::make_shared<Term>(IdentT{std::move(name)}); }

TermPtr choice(std::vector<Branch> branches) {
  return std::make_shared<Term>(ChoiceT{std::move(branches)});
}

TermPtr closure(TermPtr body, Label label, double rate) {
  return std::make_shared<Term>(ClosureT{std::move(body), std::move(label), rate});
}

TermPtr coop(std::vector<Label> labels, std::vector<TermPtr> components) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return std::make_shared<Term>(CoopT{std::move(labels), std::move(components)});
}

const TermPtr* Model::find_equation(const std::string& name) const {
  auto it = equations.find(name);
  return it == equations.end() ? nullptr : &it->second;
}

const SystemDef* Model::find_system(const std::string& name) const {
  for (const auto& s : systems)
    if (s.name == name) return &s;
  return nullptr;
}

const TermPtr& Model::equation(const std::string& name) const {
  auto it = equations.find(name);
  if (it == equations.end())
    throw Error(Error::Kind::name, "undefined identifier: " + name);
  return it->second;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  ident,
  number,
  lparen,
  rparen,
  lbrace,
  rbrace,
  lbracket,
  rbracket,
  comma,
  dot,
  plus,
  eq,
  semi,
  question,
  arrow, // <-
  zero,
  kw_system,
  kw_coop,
  kw_let,
  eof,
};

struct Token {
  Tok kind;
  std::string text;
  double num = 0;
  int line = 1;
  int col = 1;
};

class Lexer {
public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

private:
  void advance() {
    skip_ws();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= text_.size()) {
      tok_.kind = Tok::eof;
      tok_.text = "<eof>";
      return;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '#')
          bump();
        else
          break;
      }
      tok_.text = text_.substr(start, pos_ - start);
      if (tok_.text == "system")
        tok_.kind = Tok::kw_system;
      else if (tok_.text == "coop")
        tok_.kind = Tok::kw_coop;
      else if (tok_.text == "let")
        tok_.kind = Tok::kw_let;
      else
        tok_.kind = Tok::ident;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E' ||
                                     ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                                      (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
        bump();
      tok_.text = text_.substr(start, pos_ - start);
      if (tok_.text == "0") {
        tok_.kind = Tok::zero;
        return;
      }
      double value = 0;
      auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
      if (res.ec != std::errc{} || res.ptr != text_.data() + pos_)
        throw Error(Error::Kind::parse, "malformed number '" + tok_.text + "'", tok_.line, tok_.col);
      tok_.kind = Tok::number;
      tok_.num = value;
      return;
    }
    switch (c) {
      case '(': single(Tok::lparen); return;
      case ')': single(Tok::rparen); return;
      case '{': single(Tok::lbrace); return;
      case '}': single(Tok::rbrace); return;
      case '[': single(Tok::lbracket); return;
      case ']': single(Tok::rbracket); return;
      case ',': single(Tok::comma); return;
      case '.': single(Tok::dot); return;
      case '+': single(Tok::plus); return;
      case '=': single(Tok::eq); return;
      case ';': single(Tok::semi); return;
      case '?': single(Tok::question); return;
      case '<':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
          tok_.kind = Tok::arrow;
          tok_.text = "<-";
          bump();
          bump();
          return;
        }
        break;
      default: break;
    }
    throw Error(Error::Kind::parse, std::string("unexpected character '") + c + "'", line_, col_);
  }

  void single(Tok kind) {
    tok_.kind = kind;
    tok_.text = text_.substr(pos_, 1);
    bump();
  }

  void skip_ws() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') bump();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (text_[pos_] == '\n') {
      line_++;
      col_ = 1;
    } else {
      col_++;
    }
    pos_++;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Parser
//
//   model    := (let | def | system)*
//   let      := "let" IDENT "=" NUMBER ";"
//   def      := IDENT "=" term ";"
//   system   := "system" IDENT "=" syscomp ";"
//   syscomp  := IDENT | "coop" "{" labellist? "}" "(" syscomp ("," syscomp)* ")"
//   term     := "0" | sum | closed
//   closed   := (IDENT | "(" term ")") ("[" LABEL "<-" rateconst "]")+
//   sum      := prefix ("+" prefix)*
//   prefix   := "(" LABEL "," rate ")" "." cont
//   cont     := "0" | IDENT | "(" term ")" | prefix
//   rate     := rateconst | "?"
//   rateconst:= NUMBER | IDENT        (IDENT must be a let constant)

class Parser {
public:
  explicit Parser(const std::string& text) : lex_(text) {}

  Model run() {
    Model model;
    while (lex_.peek().kind != Tok::eof) {
      if (lex_.peek().kind == Tok::kw_let)
        parse_let(model);
      else if (lex_.peek().kind == Tok::kw_system)
        parse_system(model);
      else
        parse_def(model);
    }
    validate(model);
    return model;
  }

  // One term or system composition against an existing model's names. A bare
  // identifier is allowed here (it queries that equation's state).
  TermPtr run_query(const Model& model) {
    TermPtr t;
    if (lex_.peek().kind == Tok::kw_coop) {
      t = parse_syscomp(model);
    } else if (lex_.peek().kind == Tok::ident) {
      Token name = lex_.take();
      remember_ref(name);
      t = lex_.peek().kind == Tok::lbracket ? parse_closure_suffixes(model, ident(name.text))
                                            : ident(name.text);
    } else {
      t = parse_term(model);
    }
    if (lex_.peek().kind == Tok::semi) lex_.take();
    if (lex_.peek().kind != Tok::eof)
      throw Error(Error::Kind::parse, "unexpected trailing input '" + lex_.peek().text + "'",
                  lex_.peek().line, lex_.peek().col);
    validate(model);
    return t;
  }

private:
  Token expect(Tok kind, const char* what) {
    if (lex_.peek().kind != kind)
      throw Error(Error::Kind::parse,
                  std::string("expected ") + what + ", got '" + lex_.peek().text + "'",
                  lex_.peek().line, lex_.peek().col);
    return lex_.take();
  }

  void check_fresh(Model& model, const Token& name) {
    if (model.equations.count(name.text) || model.constants.count(name.text) ||
        model.find_system(name.text))
      throw Error(Error::Kind::name, "duplicate definition of '" + name.text + "'", name.line,
                  name.col);
  }

  void parse_let(Model& model) {
    lex_.take();
    Token name = expect(Tok::ident, "constant name");
    check_fresh(model, name);
    expect(Tok::eq, "'='");
    Token num = expect(Tok::number, "number");
    if (!(num.num > 0))
      throw Error(Error::Kind::rate, "constant '" + name.text + "' must be positive", num.line,
                  num.col);
    expect(Tok::semi, "';'");
    model.constants[name.text] = num.num;
  }

  void parse_def(Model& model) {
    Token name = expect(Tok::ident, "identifier");
    check_fresh(model, name);
    expect(Tok::eq, "'='");
    TermPtr body = parse_term(model);
    expect(Tok::semi, "';'");
    model.equations[name.text] = body;
    model.equation_order.push_back(name.text);
  }

  void parse_system(Model& model) {
    lex_.take();
    Token name = expect(Tok::ident, "system name");
    check_fresh(model, name);
    expect(Tok::eq, "'='");
    if (lex_.peek().kind != Tok::kw_coop)
      throw Error(Error::Kind::parse, "expected 'coop'", lex_.peek().line, lex_.peek().col);
    TermPtr sys = parse_syscomp(model);
    expect(Tok::semi, "';'");
    model.systems.push_back(SystemDef{name.text, sys});
  }

  TermPtr parse_syscomp(const Model& model) {
    if (lex_.peek().kind == Tok::ident) {
      Token t = lex_.take();
      pending_refs_.push_back(t);
      return ident(t.text);
    }
    expect(Tok::kw_coop, "'coop' or identifier");
    expect(Tok::lbrace, "'{'");
    std::vector<Label> labels;
    if (lex_.peek().kind != Tok::rbrace) {
      labels.push_back(expect(Tok::ident, "label").text);
      while (lex_.peek().kind == Tok::comma) {
        lex_.take();
        labels.push_back(expect(Tok::ident, "label").text);
      }
    }
    expect(Tok::rbrace, "'}'");
    expect(Tok::lparen, "'('");
    std::vector<TermPtr> comps;
    comps.push_back(parse_syscomp(model));
    while (lex_.peek().kind == Tok::comma) {
      lex_.take();
      comps.push_back(parse_syscomp(model));
    }
    expect(Tok::rparen, "')'");
    return coop(std::move(labels), std::move(comps));
  }

  TermPtr parse_term(const Model& model) {
    if (lex_.peek().kind == Tok::zero) {
      Token z = lex_.take();
      if (lex_.peek().kind == Tok::lbracket)
        return parse_closure_suffixes(model, nil());
      (void)z;
      return nil();
    }
    if (lex_.peek().kind == Tok::ident) {
      Token name = lex_.take();
      remember_ref(name);
      if (lex_.peek().kind != Tok::lbracket)
        throw Error(Error::Kind::parse,
                    "bare identifier is not a term; expected '[' for a closure",
                    lex_.peek().line, lex_.peek().col);
      return parse_closure_suffixes(model, ident(name.text));
    }
    if (lex_.peek().kind == Tok::lparen) {
      // Either a prefix "(label, rate)." or a parenthesized term.
      if (starts_prefix()) return parse_sum(model);
      lex_.take();
      TermPtr inner = parse_term(model);
      expect(Tok::rparen, "')'");
      if (lex_.peek().kind == Tok::lbracket) return parse_closure_suffixes(model, inner);
      return inner;
    }
    throw Error(Error::Kind::parse, "expected a term, got '" + lex_.peek().text + "'",
                lex_.peek().line, lex_.peek().col);
  }

  // Lookahead: "(" IDENT ("," | ...) — prefixes are "(label, rate)". A
  // parenthesized term never has a comma after its first identifier.
  bool starts_prefix() {
    // Cheap two-token lookahead by copying the lexer state is not available;
    // instead decide on the shape after '(': a label followed by ','.
    // We re-lex from a saved position.
    Lexer probe = lex_;
    probe.take(); // '('
    if (probe.peek().kind != Tok::ident) return false;
    probe.take();
    return probe.peek().kind == Tok::comma;
  }

  TermPtr parse_closure_suffixes(const Model& model, TermPtr body) {
    TermPtr t = std::move(body);
    while (lex_.peek().kind == Tok::lbracket) {
      lex_.take();
      Token label = expect(Tok::ident, "label");
      expect(Tok::arrow, "'<-'");
      double rate = parse_rate_const(model);
      expect(Tok::rbracket, "']'");
      t = closure(std::move(t), label.text, rate);
    }
    return t;
  }

  TermPtr parse_sum(const Model& model) {
    std::vector<Branch> branches;
    branches.push_back(parse_prefix(model));
    while (lex_.peek().kind == Tok::plus) {
      lex_.take();
      branches.push_back(parse_prefix(model));
    }
    return choice(std::move(branches));
  }

  Branch parse_prefix(const Model& model) {
    expect(Tok::lparen, "'('");
    Token label = expect(Tok::ident, "label");
    expect(Tok::comma, "','");
    RateSpec rate = parse_rate(model);
    expect(Tok::rparen, "')'");
    expect(Tok::dot, "'.'");
    TermPtr cont = parse_cont(model);
    return Branch{label.text, rate, std::move(cont)};
  }

  TermPtr parse_cont(const Model& model) {
    switch (lex_.peek().kind) {
      case Tok::zero:
        lex_.take();
        if (lex_.peek().kind == Tok::lbracket) return parse_closure_suffixes(model, nil());
        return nil();
      case Tok::ident: {
        Token name = lex_.take();
        remember_ref(name);
        if (lex_.peek().kind == Tok::lbracket)
          return parse_closure_suffixes(model, ident(name.text));
        return ident(name.text);
      }
      case Tok::lparen: {
        if (starts_prefix()) {
          // Nested prefix sugar: (a,r).(b,s).E
          Branch b = parse_prefix(model);
          return choice({std::move(b)});
        }
        lex_.take();
        TermPtr inner = parse_term(model);
        expect(Tok::rparen, "')'");
        if (lex_.peek().kind == Tok::lbracket) return parse_closure_suffixes(model, inner);
        return inner;
      }
      default:
        throw Error(Error::Kind::parse,
                    "expected continuation (0, identifier, prefix or parenthesized term)",
                    lex_.peek().line, lex_.peek().col);
    }
  }

  RateSpec parse_rate(const Model& model) {
    if (lex_.peek().kind == Tok::question) {
      lex_.take();
      return RateSpec::passive();
    }
    return RateSpec::constant(parse_rate_const(model));
  }

  double parse_rate_const(const Model& model) {
    Token t = lex_.take();
    if (t.kind == Tok::number) {
      if (!(t.num > 0))
        throw Error(Error::Kind::rate, "rate must be positive, got " + t.text, t.line, t.col);
      return t.num;
    }
    if (t.kind == Tok::zero)
      throw Error(Error::Kind::rate, "rate must be positive, got 0", t.line, t.col);
    if (t.kind == Tok::ident) {
      auto it = model.constants.find(t.text);
      if (it == model.constants.end())
        throw Error(Error::Kind::name, "unknown constant '" + t.text + "'", t.line, t.col);
      return it->second;
    }
    throw Error(Error::Kind::parse, "expected a rate, got '" + t.text + "'", t.line, t.col);
  }

  void remember_ref(const Token& t) { pending_refs_.push_back(t); }

  // Every referenced identifier must name a defined sequential process.
  void validate(const Model& model) {
    for (const Token& ref : pending_refs_) {
      if (model.equations.count(ref.text)) continue;
      throw Error(Error::Kind::name, "undefined identifier '" + ref.text + "'", ref.line, ref.col);
    }
  }

  Lexer lex_;
  std::vector<Token> pending_refs_;
};

} // namespace

Model parse_model(const std::string& text) {
  Parser parser(text);
  return parser.run();
}

TermPtr parse_query(const Model& model, const std::string& text) {
  Parser parser(text);
  return parser.run_query(model);
}

// ---------------------------------------------------------------------------
// Formatting

namespace {

void format_into(const TermPtr& term, std::string& out);

void format_cont(const TermPtr& cont, std::string& out) {
  if (std::holds_alternative<NilT>(*cont)) {
    out += "0";
  } else if (auto* id = std::get_if<IdentT>(&*cont)) {
    out += id->name;
  } else {
    out += "(";
    format_into(cont, out);
    out += ")";
  }
}

void format_into(const TermPtr& term, std::string& out) {
  if (std::holds_alternative<NilT>(*term)) {
    out += "0";
    return;
  }
  if (auto* id = std::get_if<IdentT>(&*term)) {
    out += id->name;
    return;
  }
  if (auto* ch = std::get_if<ChoiceT>(&*term)) {
    bool first = true;
    for (const Branch& b : ch->branches) {
      if (!first) out += " + ";
      first = false;
      out += "(" + b.label + ",";
      out += b.rate.is_passive() ? "?" : format_number(b.rate.value());
      out += ").";
      format_cont(b.cont, out);
    }
    return;
  }
  if (auto* cl = std::get_if<ClosureT>(&*term)) {
    const bool needs_parens = !std::holds_alternative<IdentT>(*cl->body) &&
                              !std::holds_alternative<ClosureT>(*cl->body);
    if (needs_parens) out += "(";
    format_into(cl->body, out);
    if (needs_parens) out += ")";
    out += "[" + cl->label + " <- " + format_number(cl->rate) + "]";
    return;
  }
  const auto& co = std::get<CoopT>(*term);
  out += "coop {";
  bool first = true;
  for (const Label& l : co.labels) {
    if (!first) out += ",";
    first = false;
    out += l;
  }
  out += "} (";
  first = true;
  for (const TermPtr& c : co.components) {
    if (!first) out += ", ";
    first = false;
    format_into(c, out);
  }
  out += ")";
}

} // namespace

std::string format_term(const TermPtr& term) {
  std::string out;
  format_into(term, out);
  return out;
}

// ---------------------------------------------------------------------------
// Desugaring

namespace {

class Desugarer {
public:
  explicit Desugarer(const Model& in) : in_(in), out_() {
    out_.constants = in.constants;
    out_.systems = in.systems;
  }

  Model run() {
    for (const auto& name : in_.equation_order) {
      out_.equation_order.push_back(name);
      out_.equations[name] = flatten(in_.equations.at(name), name);
    }
    // Synthetic equations were appended to equation_order as created.
    return std::move(out_);
  }

private:
  // Returns a strict-grammar body for an equation: Nil, Choice with atomic
  // continuations, or Closure over a strict body.
  TermPtr flatten(const TermPtr& term, const std::string& parent) {
    if (std::holds_alternative<NilT>(*term) || std::holds_alternative<IdentT>(*term)) return term;
    if (auto* ch = std::get_if<ChoiceT>(&*term)) {
      std::vector<Branch> branches;
      branches.reserve(ch->branches.size());
      for (const Branch& b : ch->branches)
        branches.push_back(Branch{b.label, b.rate, atomize(b.cont, parent)});
      return choice(std::move(branches));
    }
    if (auto* cl = std::get_if<ClosureT>(&*term))
      return closure(flatten(cl->body, parent), cl->label, cl->rate);
    const auto& co = std::get<CoopT>(*term);
    std::vector<TermPtr> comps;
    for (const TermPtr& c : co.components) comps.push_back(flatten(c, parent));
    return coop(co.labels, std::move(comps));
  }

  // Continuations must be 0 or an identifier; anything else becomes a fresh
  // synthetic equation named parent#k.
  TermPtr atomize(const TermPtr& cont, const std::string& parent) {
    if (std::holds_alternative<NilT>(*cont) || std::holds_alternative<IdentT>(*cont)) return cont;
    std::string name = fresh_name(parent);
    out_.equation_order.push_back(name);
    out_.equations[name] = nil(); // reserve before recursing so names stay in creation order
    out_.equations[name] = flatten(cont, name);
    return ident(name);
  }

  std::string fresh_name(const std::string& parent) {
    // Number from the original parent so A0#1's inner state is A0#2, not A0#1#1.
    std::string base = parent.substr(0, parent.find('#'));
    int& k = counters_[base];
    std::string name;
    do {
      ++k;
      name = base + "#" + std::to_string(k);
    } while (in_.equations.count(name) || out_.equations.count(name));
    return name;
  }

  const Model& in_;
  Model out_;
  std::map<std::string, int> counters_;
};

} // namespace

Model desugar(const Model& model) { return Desugarer(model).run(); }

} // namespace sspa
