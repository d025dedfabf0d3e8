#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "consent_audit/dsl.hpp"

namespace consent_audit::facts {

using Tuple = std::vector<std::string>;

// Typed relation store. Tuples are deduplicated sets; every tuple length
// matches the declared arity of its relation.
class FactDb {
 public:
  void declare(const std::string& relation, std::size_t arity);
  bool declared(const std::string& relation) const;
  std::size_t arity(const std::string& relation) const;

  // Throws SchemaError on arity mismatch. Declares the relation implicitly
  // when unknown.
  void insert(const std::string& relation, Tuple tuple);

  const std::set<Tuple>& tuples(const std::string& relation) const;
  bool contains(const std::string& relation, const Tuple& tuple) const;

  const std::map<std::string, std::set<Tuple>>& relations() const {
    return relations_;
  }
  const std::map<std::string, std::size_t>& schema() const { return schema_; }

  bool operator==(const FactDb&) const = default;

 private:
  std::map<std::string, std::set<Tuple>> relations_;
  std::map<std::string, std::size_t> schema_;
};

// Semantic predicates of the annotation layer.
enum class Predicate {
  kAction,               // action/2 (request text, action phrase)
  kPurpose,              // purpose/2 (text, purpose)
  kActionMapping,        // action_mapping/2 (element uid, action phrase)
  kCategory,             // category/3 (text, category, purpose)
  kController,           // controller/1
  kWithdraw,             // withdraw/2 (text, method)
  kPolarityAffirmative,  // polarity_affirmative/1 (request text)
};

const char* relation_name(Predicate p);
std::size_t predicate_arity(Predicate p);

struct SemanticFact {
  Predicate predicate;
  Tuple terms;

  bool operator==(const SemanticFact&) const = default;
  bool operator<(const SemanticFact& o) const {
    return std::tie(predicate, terms) < std::tie(o.predicate, o.terms);
  }
};

struct BaseFactConfig {
  std::vector<std::string> select_types = {"checkbox", "radio", "toggle",
                                           "combobox"};
  std::vector<std::string> submit_keywords = {
      "submit", "subscribe", "sign up", "register", "send",
      "book",   "request",   "join",    "continue"};
};

// Lower a form into the base EDB relations: item/3, selected/1,
// element_sent/2, submit_button/1, is_select_type/1.
FactDb generate_base_facts(const dsl::WebForm& form,
                           const BaseFactConfig& cfg = {});

// Materialize validated semantic facts on top of a base FactDb.
FactDb merge_semantic_facts(FactDb db, const std::vector<SemanticFact>& facts);

// One `<relation>.facts` file per relation, TAB-separated, sorted.
void export_facts(const FactDb& db, const std::string& dir);
FactDb import_facts(const std::string& dir);

}  // namespace consent_audit::facts
