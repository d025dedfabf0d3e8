#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "consent_audit/facts.hpp"

namespace consent_audit::datalog {

struct Term {
  enum class Kind { kConstant, kVariable, kWildcard };
  Kind kind = Kind::kWildcard;
  std::string value;  // constant text or variable name

  static Term constant(std::string v) {
    return {Kind::kConstant, std::move(v)};
  }
  static Term variable(std::string v) {
    return {Kind::kVariable, std::move(v)};
  }
  static Term wildcard() { return {Kind::kWildcard, {}}; }

  bool operator==(const Term&) const = default;
};

struct Atom {
  std::string relation;
  std::vector<Term> terms;
  bool negated = false;

  bool operator==(const Atom&) const = default;
};

struct Inequality {
  Term left;
  Term right;

  bool operator==(const Inequality&) const = default;
};

enum class Comparator { kEq, kGt, kGe, kLt, kLe };

// count:{ V : body } OP bound. Variables shared with the outer rule body
// are correlated (bound before the count runs); variables local to the
// body are existential; V is counted DISTINCT.
struct CountConstraint {
  Term counted;
  std::vector<Atom> body;  // positive or negated atoms of lower strata
  std::vector<Inequality> guards;
  Comparator cmp = Comparator::kEq;
  std::int64_t bound = 0;

  bool operator==(const CountConstraint&) const = default;
};

using Literal = std::variant<Atom, Inequality, CountConstraint>;

struct Rule {
  Atom head;  // never negated
  std::vector<Literal> body;

  bool operator==(const Rule&) const = default;
};

struct Program {
  std::vector<Rule> rules;
  std::map<std::string, std::size_t> arities;
  std::set<std::string> edb;
  std::set<std::string> idb;
};

// Parses the `.dl` rule syntax (see rules_dump for the concrete grammar):
// disjunctions `(a ; b)` are desugared into one rule per disjunct and
// wildcards replaced by fresh variables. Throws SyntaxError, SafetyError
// or StratificationError.
Program parse_program(const std::string& source);

// Relations grouped by stratum, lowest first. Stratum 0 holds the EDB.
// Negated/aggregated dependencies point strictly downward. Deterministic:
// minimal stratum numbers, names sorted within a stratum.
std::vector<std::set<std::string>> stratify(const Program& program);

// Least fixpoint per stratum via semi-naive iteration. Result contains
// only IDB relations.
facts::FactDb evaluate(const Program& program, const facts::FactDb& edb);

}  // namespace consent_audit::datalog
