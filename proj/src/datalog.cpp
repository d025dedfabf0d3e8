#include "consent_audit/datalog.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "consent_audit/errors.hpp"

namespace consent_audit::datalog {

namespace {

// ---------------------------------------------------------------- lexer

enum class TokKind {
  kIdent, kString, kNumber,
  kLParen, kRParen, kLBrace, kRBrace,
  kComma, kSemicolon, kPeriod, kColon, kBang, kSlash,
  kImplies,            // :-
  kNeq, kEq, kLt, kLe, kGt, kGe,
  kDecl,               // .decl
  kEnd,
};

struct Token {
  TokKind kind;
  std::string text;
  std::size_t line;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') { ++line_; ++pos_; continue; }
      if (std::isspace(static_cast<unsigned char>(c))) { ++pos_; continue; }
      if (c == '%') {  // line comment
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == ':' && peek(1) == '-') { out.push_back(tok(TokKind::kImplies, ":-")); pos_ += 2; continue; }
      if (c == '!' && peek(1) == '=') { out.push_back(tok(TokKind::kNeq, "!=")); pos_ += 2; continue; }
      if (c == '<' && peek(1) == '=') { out.push_back(tok(TokKind::kLe, "<=")); pos_ += 2; continue; }
      if (c == '>' && peek(1) == '=') { out.push_back(tok(TokKind::kGe, ">=")); pos_ += 2; continue; }
      if (c == '.' && src_.compare(pos_, 5, ".decl") == 0) {
        out.push_back(tok(TokKind::kDecl, ".decl")); pos_ += 5; continue;
      }
      switch (c) {
        case '(': out.push_back(tok(TokKind::kLParen, "(")); ++pos_; continue;
        case ')': out.push_back(tok(TokKind::kRParen, ")")); ++pos_; continue;
        case '{': out.push_back(tok(TokKind::kLBrace, "{")); ++pos_; continue;
        case '}': out.push_back(tok(TokKind::kRBrace, "}")); ++pos_; continue;
        case ',': out.push_back(tok(TokKind::kComma, ",")); ++pos_; continue;
        case ';': out.push_back(tok(TokKind::kSemicolon, ";")); ++pos_; continue;
        case '.': out.push_back(tok(TokKind::kPeriod, ".")); ++pos_; continue;
        case ':': out.push_back(tok(TokKind::kColon, ":")); ++pos_; continue;
        case '!': out.push_back(tok(TokKind::kBang, "!")); ++pos_; continue;
        case '/': out.push_back(tok(TokKind::kSlash, "/")); ++pos_; continue;
        case '=': out.push_back(tok(TokKind::kEq, "=")); ++pos_; continue;
        case '<': out.push_back(tok(TokKind::kLt, "<")); ++pos_; continue;
        case '>': out.push_back(tok(TokKind::kGt, ">")); ++pos_; continue;
        default: break;
      }
      if (c == '"') { out.push_back(lex_string()); continue; }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
        out.push_back(lex_number());
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(lex_ident());
        continue;
      }
      throw SyntaxError("line " + std::to_string(line_) +
                        ": unexpected character '" + std::string(1, c) + "'");
    }
    out.push_back(tok(TokKind::kEnd, ""));
    return out;
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  Token tok(TokKind k, std::string t) const { return {k, std::move(t), line_}; }

  Token lex_string() {
    std::size_t start_line = line_;
    ++pos_;  // opening quote
    std::string value;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        ++pos_;
        char e = src_[pos_];
        value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
      } else {
        if (c == '\n') ++line_;
        value.push_back(c);
      }
      ++pos_;
    }
    if (pos_ >= src_.size())
      throw SyntaxError("line " + std::to_string(start_line) +
                        ": unterminated string");
    ++pos_;  // closing quote
    return {TokKind::kString, value, start_line};
  }

  Token lex_number() {
    std::size_t start = pos_;
    if (src_[pos_] == '-') ++pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    return {TokKind::kNumber, src_.substr(start, pos_ - start), line_};
  }

  Token lex_ident() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      ++pos_;
    return {TokKind::kIdent, src_.substr(start, pos_ - start), line_};
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

// --------------------------------------------------------------- parser

// A pre-desugaring body element: either a single literal loaded with
// alternatives (from `(a ; b)`) where each alternative is a literal list.
struct BodyElement {
  std::vector<std::vector<Literal>> alternatives;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program run() {
    Program p;
    while (!at(TokKind::kEnd)) {
      if (at(TokKind::kDecl)) {
        parse_decl(p);
      } else {
        parse_rule(p);
      }
    }
    finalize(p);
    return p;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool at(TokKind k) const { return cur().kind == k; }
  Token eat(TokKind k, const char* what) {
    if (!at(k))
      throw SyntaxError("line " + std::to_string(cur().line) + ": expected " +
                        what + ", got '" + cur().text + "'");
    return toks_[pos_++];
  }
  bool accept(TokKind k) {
    if (at(k)) { ++pos_; return true; }
    return false;
  }

  void parse_decl(Program& p) {
    eat(TokKind::kDecl, ".decl");
    std::string name = eat(TokKind::kIdent, "relation name").text;
    eat(TokKind::kSlash, "'/'");
    std::size_t arity = std::stoul(eat(TokKind::kNumber, "arity").text);
    std::string kind = eat(TokKind::kIdent, "edb|idb").text;
    if (kind != "edb" && kind != "idb")
      throw SyntaxError("declaration of " + name + " must end with edb or idb");
    record_arity(name, arity);
    (kind == "edb" ? p.edb : p.idb).insert(name);
  }

  Term parse_term() {
    if (at(TokKind::kString))
      return Term::constant(eat(TokKind::kString, "string").text);
    if (at(TokKind::kNumber))
      return Term::constant(eat(TokKind::kNumber, "number").text);
    Token id = eat(TokKind::kIdent, "term");
    if (id.text == "_") return Term::variable(fresh_var());
    if (std::isupper(static_cast<unsigned char>(id.text[0])) ||
        id.text[0] == '_')
      return Term::variable(id.text);
    return Term::constant(id.text);
  }

  Atom parse_atom(bool negated) {
    std::string rel = eat(TokKind::kIdent, "relation name").text;
    Atom atom{rel, {}, negated};
    eat(TokKind::kLParen, "'('");
    if (!at(TokKind::kRParen)) {
      atom.terms.push_back(parse_term());
      while (accept(TokKind::kComma)) atom.terms.push_back(parse_term());
    }
    eat(TokKind::kRParen, "')'");
    record_arity(rel, atom.terms.size());
    return atom;
  }

  Comparator parse_comparator() {
    if (accept(TokKind::kEq)) return Comparator::kEq;
    if (accept(TokKind::kGt)) return Comparator::kGt;
    if (accept(TokKind::kGe)) return Comparator::kGe;
    if (accept(TokKind::kLt)) return Comparator::kLt;
    if (accept(TokKind::kLe)) return Comparator::kLe;
    throw SyntaxError("line " + std::to_string(cur().line) +
                      ": expected comparator after count body");
  }

  CountConstraint parse_count() {
    // `count` ident already consumed
    eat(TokKind::kColon, "':'");
    eat(TokKind::kLBrace, "'{'");
    Token var = eat(TokKind::kIdent, "counted variable");
    CountConstraint cc;
    cc.counted = Term::variable(var.text);
    eat(TokKind::kColon, "':'");
    while (true) {
      if (accept(TokKind::kBang)) {
        cc.body.push_back(parse_atom(true));
      } else {
        // lookahead for inequality: term != term
        std::size_t save = pos_;
        Term lhs = parse_term();
        if (accept(TokKind::kNeq)) {
          cc.guards.push_back({lhs, parse_term()});
        } else {
          pos_ = save;
          cc.body.push_back(parse_atom(false));
        }
      }
      if (!accept(TokKind::kComma)) break;
    }
    eat(TokKind::kRBrace, "'}'");
    cc.cmp = parse_comparator();
    cc.bound = std::stoll(eat(TokKind::kNumber, "aggregate bound").text);
    return cc;
  }

  // a single literal (no parentheses)
  Literal parse_simple_literal() {
    if (accept(TokKind::kBang)) return parse_atom(true);
    if (at(TokKind::kIdent) && cur().text == "count" &&
        toks_[pos_ + 1].kind == TokKind::kColon) {
      ++pos_;
      return parse_count();
    }
    std::size_t save = pos_;
    Term lhs = parse_term();
    if (accept(TokKind::kNeq)) return Inequality{lhs, parse_term()};
    pos_ = save;
    return parse_atom(false);
  }

  BodyElement parse_body_element() {
    BodyElement el;
    if (at(TokKind::kLParen)) {
      // Could be a disjunction group. A lone atom also starts with an
      // identifier, so '(' here always means grouping.
      eat(TokKind::kLParen, "'('");
      std::vector<Literal> branch;
      while (true) {
        branch.push_back(parse_simple_literal());
        if (accept(TokKind::kComma)) continue;
        el.alternatives.push_back(std::move(branch));
        branch.clear();
        if (accept(TokKind::kSemicolon)) continue;
        break;
      }
      eat(TokKind::kRParen, "')'");
      return el;
    }
    el.alternatives.push_back({parse_simple_literal()});
    return el;
  }

  void parse_rule(Program& p) {
    Atom head = parse_atom(false);
    std::vector<BodyElement> elements;
    if (accept(TokKind::kImplies)) {
      elements.push_back(parse_body_element());
      while (accept(TokKind::kComma)) elements.push_back(parse_body_element());
    }
    eat(TokKind::kPeriod, "'.'");
    heads_.insert(head.relation);

    // Desugar: cross product over alternatives.
    std::vector<std::vector<Literal>> bodies{{}};
    for (const auto& el : elements) {
      std::vector<std::vector<Literal>> next;
      for (const auto& body : bodies)
        for (const auto& alt : el.alternatives) {
          auto extended = body;
          extended.insert(extended.end(), alt.begin(), alt.end());
          next.push_back(std::move(extended));
        }
      bodies = std::move(next);
    }
    for (auto& body : bodies) p.rules.push_back({head, std::move(body)});
  }

  void record_arity(const std::string& rel, std::size_t arity) {
    auto [it, inserted] = arities_.emplace(rel, arity);
    if (!inserted && it->second != arity)
      throw SyntaxError("relation " + rel + " used with arity " +
                        std::to_string(arity) + " but earlier arity was " +
                        std::to_string(it->second));
  }

  std::string fresh_var() { return "_w" + std::to_string(fresh_counter_++); }

  void finalize(Program& p) {
    p.arities = arities_;
    // Head relations are IDB; undeclared body-only relations default to EDB.
    for (const auto& h : heads_) {
      if (p.edb.count(h))
        throw SyntaxError("relation " + h + " declared edb but has rules");
      p.idb.insert(h);
    }
    for (const auto& [rel, _] : arities_)
      if (!p.idb.count(rel)) p.edb.insert(rel);
    for (const auto& d : p.idb)
      if (!heads_.count(d) && !arities_.count(d))
        throw SyntaxError("relation " + d + " declared idb but never used");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::map<std::string, std::size_t> arities_;
  std::set<std::string> heads_;
  std::size_t fresh_counter_ = 0;
};

// --------------------------------------------------------------- safety

void collect_vars(const Atom& atom, std::set<std::string>& out) {
  for (const auto& t : atom.terms)
    if (t.kind == Term::Kind::kVariable) out.insert(t.value);
}

void term_vars(const Term& t, std::set<std::string>& out) {
  if (t.kind == Term::Kind::kVariable) out.insert(t.value);
}

void check_safety(const Rule& rule) {
  std::set<std::string> positive;
  for (const auto& lit : rule.body)
    if (const auto* atom = std::get_if<Atom>(&lit); atom && !atom->negated)
      collect_vars(*atom, positive);

  auto require = [&](const std::set<std::string>& vars, const char* what) {
    for (const auto& v : vars)
      if (!positive.count(v))
        throw SafetyError("variable " + v + " in " + what +
                          " of rule for " + rule.head.relation +
                          " does not appear in a positive body atom");
  };

  std::set<std::string> head_vars;
  collect_vars(rule.head, head_vars);
  require(head_vars, "head");

  for (const auto& lit : rule.body) {
    if (const auto* atom = std::get_if<Atom>(&lit)) {
      if (atom->negated) {
        std::set<std::string> vars;
        collect_vars(*atom, vars);
        require(vars, "negated atom");
      }
    } else if (const auto* ineq = std::get_if<Inequality>(&lit)) {
      std::set<std::string> vars;
      term_vars(ineq->left, vars);
      term_vars(ineq->right, vars);
      require(vars, "inequality");
    } else if (const auto* cc = std::get_if<CountConstraint>(&lit)) {
      if (cc->counted.kind != Term::Kind::kVariable)
        throw SafetyError("counted term must be a variable");
      if (positive.count(cc->counted.value))
        throw SafetyError("counted variable " + cc->counted.value +
                          " is bound outside its aggregate");
      std::set<std::string> inner_positive = positive;
      for (const auto& a : cc->body)
        if (!a.negated) collect_vars(a, inner_positive);
      if (!inner_positive.count(cc->counted.value))
        throw SafetyError("counted variable " + cc->counted.value +
                          " does not appear in the aggregate body");
      for (const auto& a : cc->body)
        if (a.negated) {
          std::set<std::string> vars;
          collect_vars(a, vars);
          for (const auto& v : vars)
            if (!inner_positive.count(v))
              throw SafetyError("variable " + v +
                                " in negated aggregate atom is unbound");
        }
      for (const auto& g : cc->guards) {
        std::set<std::string> vars;
        term_vars(g.left, vars);
        term_vars(g.right, vars);
        for (const auto& v : vars)
          if (!inner_positive.count(v))
            throw SafetyError("variable " + v +
                              " in aggregate inequality is unbound");
      }
    }
  }
}

// ---------------------------------------------------------- stratification

struct Dependency {
  std::string from;  // body relation
  bool negative;     // negated or under an aggregate
};

std::map<std::string, std::vector<Dependency>> dependencies(const Program& p) {
  std::map<std::string, std::vector<Dependency>> deps;
  for (const auto& rule : p.rules) {
    auto& list = deps[rule.head.relation];
    for (const auto& lit : rule.body) {
      if (const auto* atom = std::get_if<Atom>(&lit)) {
        list.push_back({atom->relation, atom->negated});
      } else if (const auto* cc = std::get_if<CountConstraint>(&lit)) {
        for (const auto& a : cc->body) list.push_back({a.relation, true});
      }
    }
  }
  return deps;
}

}  // namespace

std::vector<std::set<std::string>> stratify(const Program& program) {
  auto deps = dependencies(program);
  std::map<std::string, std::size_t> stratum;
  for (const auto& r : program.edb) stratum[r] = 0;
  for (const auto& r : program.idb) stratum[r] = 1;

  const std::size_t limit = program.idb.size() + 2;
  bool changed = true;
  std::size_t rounds = 0;
  while (changed) {
    changed = false;
    if (++rounds > limit + program.idb.size()) break;
    for (const auto& [head, list] : deps) {
      for (const auto& d : list) {
        std::size_t need = stratum[d.from] + (d.negative ? 1 : 0);
        if (stratum[head] < need) {
          stratum[head] = need;
          changed = true;
        }
      }
    }
  }
  for (const auto& [rel, s] : stratum)
    if (s > limit) {
      std::string cycle;
      for (const auto& [r, sr] : stratum)
        if (sr > limit) cycle += (cycle.empty() ? "" : ", ") + r;
      throw StratificationError(
          "negation/aggregate cycle through relations: " + cycle);
    }

  std::size_t max_stratum = 0;
  for (const auto& [_, s] : stratum) max_stratum = std::max(max_stratum, s);
  std::vector<std::set<std::string>> out(max_stratum + 1);
  for (const auto& [rel, s] : stratum) out[s].insert(rel);
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

Program parse_program(const std::string& source) {
  Lexer lexer(source);
  Parser parser(lexer.run());
  Program p = parser.run();
  for (const auto& rule : p.rules) check_safety(rule);
  stratify(p);  // throws StratificationError on a negative cycle
  return p;
}

// ------------------------------------------------------------- evaluation

namespace {

using Binding = std::map<std::string, std::string>;

class Evaluator {
 public:
  Evaluator(const Program& program, const facts::FactDb& edb)
      : program_(program), edb_(edb) {
    for (const auto& [rel, arity] : program.arities) {
      if (program.edb.count(rel) && edb.declared(rel) &&
          edb.arity(rel) != arity)
        throw SchemaError("relation " + rel + " has arity " +
                          std::to_string(edb.arity(rel)) +
                          " in the fact database but " +
                          std::to_string(arity) + " in the program");
    }
    for (const auto& rel : program.idb)
      idb_.declare(rel, program.arities.at(rel));
  }

  facts::FactDb run() {
    auto strata = stratify(program_);
    for (const auto& stratum : strata) {
      std::vector<const Rule*> rules;
      for (const auto& rule : program_.rules)
        if (stratum.count(rule.head.relation))
          rules.push_back(&rule);
      if (!rules.empty()) evaluate_stratum(rules, stratum);
    }
    return idb_;
  }

 private:
  const std::set<facts::Tuple>& relation(const std::string& name) const {
    if (program_.idb.count(name)) return idb_.tuples(name);
    return edb_.tuples(name);
  }

  static bool match(const Atom& atom, const facts::Tuple& tuple,
                    Binding& binding) {
    if (tuple.size() != atom.terms.size()) return false;
    std::vector<std::pair<std::string, std::string>> added;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
      const Term& t = atom.terms[i];
      switch (t.kind) {
        case Term::Kind::kConstant:
          if (t.value != tuple[i]) goto fail;
          break;
        case Term::Kind::kVariable: {
          auto it = binding.find(t.value);
          if (it == binding.end()) {
            binding[t.value] = tuple[i];
            added.emplace_back(t.value, tuple[i]);
          } else if (it->second != tuple[i]) {
            goto fail;
          }
          break;
        }
        case Term::Kind::kWildcard:
          break;
      }
    }
    return true;
  fail:
    for (const auto& [k, _] : added) binding.erase(k);
    return false;
  }

  std::string resolve(const Term& t, const Binding& binding) const {
    if (t.kind == Term::Kind::kConstant) return t.value;
    auto it = binding.find(t.value);
    if (it == binding.end())
      throw SafetyError("unbound variable " + t.value + " at evaluation time");
    return it->second;
  }

  bool ground_atom_holds(const Atom& atom, const Binding& binding) const {
    facts::Tuple tuple;
    tuple.reserve(atom.terms.size());
    for (const auto& t : atom.terms) tuple.push_back(resolve(t, binding));
    return relation(atom.relation).count(tuple) != 0;
  }

  bool count_satisfied(const CountConstraint& cc, const Binding& outer) const {
    std::set<std::string> values;
    std::vector<Atom> positives, negatives;
    for (const auto& a : cc.body)
      (a.negated ? negatives : positives).push_back(a);

    std::function<void(std::size_t, Binding&)> rec = [&](std::size_t i,
                                                          Binding& b) {
      if (i == positives.size()) {
        for (const auto& n : negatives)
          if (ground_atom_holds(n, b)) return;
        for (const auto& g : cc.guards)
          if (resolve(g.left, b) == resolve(g.right, b)) return;
        auto it = b.find(cc.counted.value);
        if (it != b.end()) values.insert(it->second);
        return;
      }
      for (const auto& tuple : relation(positives[i].relation)) {
        Binding saved = b;
        if (match(positives[i], tuple, b)) rec(i + 1, b);
        b = std::move(saved);
      }
    };
    Binding b = outer;
    rec(0, b);

    auto n = static_cast<std::int64_t>(values.size());
    switch (cc.cmp) {
      case Comparator::kEq: return n == cc.bound;
      case Comparator::kGt: return n > cc.bound;
      case Comparator::kGe: return n >= cc.bound;
      case Comparator::kLt: return n < cc.bound;
      case Comparator::kLe: return n <= cc.bound;
    }
    return false;
  }

  // Fire one rule; `delta_pos` (when set) is the index among the positive
  // atoms that must read from `delta` instead of the full relation.
  void fire(const Rule& rule,
            const std::map<std::string, std::set<facts::Tuple>>* delta,
            std::optional<std::size_t> delta_pos,
            std::set<facts::Tuple>& out) {
    std::vector<const Atom*> positives;
    std::vector<const Literal*> filters;
    for (const auto& lit : rule.body) {
      if (const auto* atom = std::get_if<Atom>(&lit); atom && !atom->negated)
        positives.push_back(atom);
      else
        filters.push_back(&lit);
    }

    std::function<void(std::size_t, Binding&)> rec = [&](std::size_t i,
                                                          Binding& b) {
      if (i == positives.size()) {
        for (const auto* lit : filters) {
          if (const auto* atom = std::get_if<Atom>(lit)) {
            if (ground_atom_holds(*atom, b)) return;
          } else if (const auto* ineq = std::get_if<Inequality>(lit)) {
            if (resolve(ineq->left, b) == resolve(ineq->right, b)) return;
          } else if (const auto* cc = std::get_if<CountConstraint>(lit)) {
            if (!count_satisfied(*cc, b)) return;
          }
        }
        facts::Tuple tuple;
        tuple.reserve(rule.head.terms.size());
        for (const auto& t : rule.head.terms)
          tuple.push_back(resolve(t, b));
        out.insert(std::move(tuple));
        return;
      }
      const Atom& atom = *positives[i];
      const std::set<facts::Tuple>* source = &relation(atom.relation);
      if (delta_pos && *delta_pos == i) {
        auto it = delta->find(atom.relation);
        if (it == delta->end()) return;
        source = &it->second;
      }
      for (const auto& tuple : *source) {
        Binding saved = b;
        if (match(atom, tuple, b)) rec(i + 1, b);
        b = std::move(saved);
      }
    };
    Binding b;
    rec(0, b);
  }

  void evaluate_stratum(const std::vector<const Rule*>& rules,
                        const std::set<std::string>& stratum) {
    // positions of same-stratum positive atoms per rule, for delta joins
    std::map<const Rule*, std::vector<std::size_t>> recursive_positions;
    for (const Rule* rule : rules) {
      std::size_t pos = 0;
      for (const auto& lit : rule->body) {
        if (const auto* atom = std::get_if<Atom>(&lit);
            atom && !atom->negated) {
          if (stratum.count(atom->relation))
            recursive_positions[rule].push_back(pos);
          ++pos;
        }
      }
    }

    // initial round: plain evaluation with same-stratum relations empty
    std::map<std::string, std::set<facts::Tuple>> delta;
    for (const Rule* rule : rules) {
      std::set<facts::Tuple> derived;
      fire(*rule, nullptr, std::nullopt, derived);
      for (auto& tuple : derived)
        if (!idb_.contains(rule->head.relation, tuple))
          delta[rule->head.relation].insert(tuple);
    }
    for (const auto& [rel, tuples] : delta)
      for (const auto& t : tuples) idb_.insert(rel, t);

    // semi-naive: join new tuples only
    while (!delta.empty()) {
      std::map<std::string, std::set<facts::Tuple>> next;
      for (const Rule* rule : rules) {
        for (std::size_t pos : recursive_positions[rule]) {
          std::set<facts::Tuple> derived;
          fire(*rule, &delta, pos, derived);
          for (auto& tuple : derived)
            if (!idb_.contains(rule->head.relation, tuple))
              next[rule->head.relation].insert(tuple);
        }
      }
      for (const auto& [rel, tuples] : next)
        for (const auto& t : tuples) idb_.insert(rel, t);
      delta = std::move(next);
    }
  }

  const Program& program_;
  const facts::FactDb& edb_;
  facts::FactDb idb_;
};

}  // namespace

facts::FactDb evaluate(const Program& program, const facts::FactDb& edb) {
  return Evaluator(program, edb).run();
}

}  // namespace consent_audit::datalog
