#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "consent_audit/datalog.hpp"
#include "consent_audit/errors.hpp"
#include "consent_audit/facts.hpp"
#include "support/datalog_oracle.hpp"

using namespace consent_audit;
using namespace consent_audit::oracle;
using datalog::Atom;
using datalog::Comparator;
using datalog::CountConstraint;
using datalog::Inequality;
using datalog::Program;
using datalog::Rule;
using datalog::Term;


// ------------------------------------------------------------- parser

TEST_CASE("parser handles terms, constants and wildcards") {
  auto p = datalog::parse_program(
      "out(X) :- rel(X, a), other(X, \"quoted text\"), third(X, _).");
  REQUIRE(p.rules.size() == 1);
  const auto& body = p.rules[0].body;
  REQUIRE(body.size() == 3);
  const auto& a0 = std::get<Atom>(body[0]);
  CHECK(a0.terms[0] == Term::variable("X"));
  CHECK(a0.terms[1] == Term::constant("a"));
  const auto& a1 = std::get<Atom>(body[1]);
  CHECK(a1.terms[1] == Term::constant("quoted text"));
  const auto& a2 = std::get<Atom>(body[2]);
  CHECK(a2.terms[1].kind == Term::Kind::kVariable);  // fresh, not shared
  CHECK(p.idb == std::set<std::string>{"out"});
  CHECK(p.edb == std::set<std::string>{"rel", "other", "third"});
}

TEST_CASE("two wildcards are distinct variables") {
  auto p = datalog::parse_program("out(X) :- rel(X, _, _).");
  const auto& a = std::get<Atom>(p.rules[0].body[0]);
  CHECK(a.terms[1] != a.terms[2]);
}

TEST_CASE("disjunction desugars to one rule per combination") {
  auto p = datalog::parse_program("out(X) :- (a(X) ; b(X)), (c(X) ; d(X)).");
  CHECK(p.rules.size() == 4);
  for (const auto& r : p.rules) CHECK(r.body.size() == 2);
}

TEST_CASE("declarations pin arity and classification") {
  CHECK_THROWS_AS(datalog::parse_program(".decl r/2 edb\nout(X) :- r(X)."),
                  SyntaxError);
  CHECK_THROWS_AS(datalog::parse_program(".decl out/1 edb\nout(X) :- r(X)."),
                  SyntaxError);
  auto p = datalog::parse_program(".decl r/1 edb\n.decl out/1 idb\nout(X) :- r(X).");
  CHECK(p.arities.at("r") == 1);
  // a declared IDB relation with no rules is legal and evaluates empty
  auto ghost = datalog::parse_program(".decl ghost/1 idb\nout(X) :- r(X).");
  facts::FactDb edb;
  edb.insert("r", {"a"});
  auto idb = datalog::evaluate(ghost, edb);
  CHECK(idb.tuples("ghost").empty());
  CHECK(idb.contains("out", {"a"}));
}

TEST_CASE("nullary relations parse and evaluate") {
  auto p = datalog::parse_program("flag() :- base(_).\ninverse() :- !flag().");
  facts::FactDb edb;
  edb.insert("base", {"x"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.contains("flag", {}));
  CHECK_FALSE(idb.contains("inverse", {}));

  facts::FactDb empty;
  empty.declare("base", 1);
  auto idb2 = datalog::evaluate(p, empty);
  CHECK_FALSE(idb2.contains("flag", {}));
  CHECK(idb2.contains("inverse", {}));
}

TEST_CASE("safety violations are rejected") {
  // head variable unbound
  CHECK_THROWS_AS(datalog::parse_program("out(X, Y) :- r(X)."), SafetyError);
  // negated atom variable unbound
  CHECK_THROWS_AS(datalog::parse_program("out(X) :- r(X), !s(Y)."), SafetyError);
  // inequality variable unbound
  CHECK_THROWS_AS(datalog::parse_program("out(X) :- r(X), X != Y."), SafetyError);
  // counted variable bound outside the aggregate
  CHECK_THROWS_AS(
      datalog::parse_program("out(X) :- r(X, C), count:{ C : s(X, C) } = 1."),
      SafetyError);
  // counted variable missing from the aggregate body
  CHECK_THROWS_AS(
      datalog::parse_program("out(X) :- r(X), count:{ C : s(X, D) } = 1."),
      SafetyError);
}

TEST_CASE("negative cycles are rejected") {
  CHECK_THROWS_AS(datalog::parse_program("p(X) :- base(X), !q(X).\n"
                                         "q(X) :- base(X), !p(X)."),
                  StratificationError);
  // aggregate cycles too
  CHECK_THROWS_AS(
      datalog::parse_program("p(X) :- base(X), count:{ Y : p(Y) } < 1."),
      StratificationError);
}

TEST_CASE("stratification is minimal and deterministic") {
  auto p = datalog::parse_program(
      "derived(X) :- base(X).\n"
      "negated(X) :- base(X), !derived(X).\n"
      "top(X) :- negated(X).");
  auto strata = datalog::stratify(p);
  REQUIRE(strata.size() == 3);
  CHECK(strata[0] == std::set<std::string>{"base"});
  CHECK(strata[1] == std::set<std::string>{"derived"});
  CHECK(strata[2] == std::set<std::string>{"negated", "top"});
}

// ------------------------------------------------------------ evaluation

TEST_CASE("transitive closure") {
  auto p = datalog::parse_program(
      "path(X, Y) :- edge(X, Y).\n"
      "path(X, Z) :- edge(X, Y), path(Y, Z).");
  facts::FactDb edb;
  edb.insert("edge", {"a", "b"});
  edb.insert("edge", {"b", "c"});
  edb.insert("edge", {"c", "d"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.tuples("path").size() == 6);
  CHECK(idb.contains("path", {"a", "d"}));
  CHECK_FALSE(idb.contains("path", {"d", "a"}));
}

TEST_CASE("negation against a completed lower stratum") {
  auto p = datalog::parse_program(
      "reach(X) :- start(X).\n"
      "reach(Y) :- reach(X), edge(X, Y).\n"
      "unreached(X) :- node(X), !reach(X).");
  facts::FactDb edb;
  edb.insert("start", {"a"});
  edb.insert("edge", {"a", "b"});
  edb.insert("node", {"a"});
  edb.insert("node", {"b"});
  edb.insert("node", {"z"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.tuples("unreached") == std::set<facts::Tuple>{{"z"}});
}

TEST_CASE("inequality filters bindings") {
  auto p = datalog::parse_program("pair(X, Y) :- r(X), r(Y), X != Y.");
  facts::FactDb edb;
  edb.insert("r", {"a"});
  edb.insert("r", {"b"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.tuples("pair") ==
        std::set<facts::Tuple>{{"a", "b"}, {"b", "a"}});
}

TEST_CASE("count aggregates count distinct bindings with correlation") {
  auto p = datalog::parse_program(
      "multi(X) :- owner(X), count:{ Y : has(X, Y) } > 1.\n"
      "single(X) :- owner(X), count:{ Y : has(X, Y) } = 1.");
  facts::FactDb edb;
  edb.insert("owner", {"a"});
  edb.insert("owner", {"b"});
  edb.insert("owner", {"c"});
  edb.insert("has", {"a", "x"});
  edb.insert("has", {"a", "y"});
  edb.insert("has", {"b", "x"});
  // duplicate facts collapse: still one distinct value
  edb.insert("has", {"b", "x"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.tuples("multi") == std::set<facts::Tuple>{{"a"}});
  CHECK(idb.tuples("single") == std::set<facts::Tuple>{{"b"}});
}

TEST_CASE("count over an empty body compares against zero") {
  auto p = datalog::parse_program(
      "lonely(X) :- owner(X), count:{ Y : has(X, Y) } = 0.");
  facts::FactDb edb;
  edb.insert("owner", {"a"});
  edb.insert("owner", {"b"});
  edb.insert("has", {"a", "x"});
  auto idb = datalog::evaluate(p, edb);
  CHECK(idb.tuples("lonely") == std::set<facts::Tuple>{{"b"}});
}

TEST_CASE("schema mismatch between program and fact database") {
  auto p = datalog::parse_program("out(X) :- r(X).");
  facts::FactDb edb;
  edb.insert("r", {"a", "b"});
  CHECK_THROWS_AS(datalog::evaluate(p, edb), SchemaError);
}

// --------------------------------------------------- randomized oracles


TEST_CASE("semi-naive evaluation equals the naive fixpoint on 200 random programs") {
  std::mt19937 rng(123456);
  int evaluated = 0;
  int attempts = 0;
  while (evaluated < 200 && attempts < 2000) {
    ++attempts;
    auto gen = random_program(rng, false);
    Program p;
    try {
      p = datalog::parse_program(gen.source);
    } catch (const Error&) {
      continue;  // generator occasionally produces unsafe shapes
    }
    CAPTURE(gen.source);
    auto fast = datalog::evaluate(p, gen.edb);
    auto slow = naive_evaluate(p, gen.edb);
    REQUIRE(fast == slow);
    ++evaluated;
  }
  CHECK(evaluated == 200);
}

TEST_CASE("aggregate rules match exhaustive enumeration on 50 random programs") {
  std::mt19937 rng(987654);
  int evaluated = 0;
  int attempts = 0;
  while (evaluated < 50 && attempts < 1000) {
    ++attempts;
    auto gen = random_program(rng, true);
    Program p;
    try {
      p = datalog::parse_program(gen.source);
    } catch (const Error&) {
      continue;
    }
    CAPTURE(gen.source);
    auto fast = datalog::evaluate(p, gen.edb);
    auto slow = naive_evaluate(p, gen.edb);
    REQUIRE(fast == slow);
    ++evaluated;
  }
  CHECK(evaluated == 50);
}
