#pragma once

#include <set>
#include <string>
#include <vector>

#include "consent_audit/datalog.hpp"
#include "consent_audit/facts.hpp"

namespace consent_audit::rules {

enum class RuleId { P1, P2, P3, P4, P5, P6, P7, P8, P9 };

enum class Principle { kFreelyGiven, kSpecificInformed, kUnambiguous };

enum class PatternId {
  kGenuineChoice,
  kSeparateConsent,
  kWithdrawalInformed,
  kDataControllerSpecified,
  kPurposeSpecified,
  kConsentPreselected,
  kOptOutConsent,
};

enum class Scope { kFormLevel, kElementLevel, kPurposeLevel };

const char* to_string(RuleId id);
const char* to_string(Principle p);
const char* to_string(PatternId id);
const char* to_string(Scope s);

struct RuleMeta {
  RuleId rule_id;
  Principle principle;
  std::string provision;
  std::string description;
};

struct ViolationPattern {
  PatternId pattern_id;
  std::vector<RuleId> satisfier_rules;
  Scope scope;
  std::string relation;  // the v_* relation reporting this pattern
};

const std::vector<RuleMeta>& rule_table();
const std::vector<ViolationPattern>& pattern_table();
const RuleMeta& rule_meta(RuleId id);
const ViolationPattern& pattern(PatternId id);

struct Violation {
  PatternId pattern_id;
  std::vector<RuleId> rule_ids;
  Principle principle;
  Scope scope;
  std::string element_uid;   // element_level only
  std::string element_type;  // element_level only
  std::string purpose;       // purpose_level only
  std::vector<std::string> request_texts;
  std::string provision;

  bool operator==(const Violation&) const = default;
};

// Source text of the embedded rule program (`.dl` syntax).
const std::string& program_source();

// The fixed, stratifiable program encoding P1-P9 and the seven violation
// patterns. Parsed once and cached.
const datalog::Program& build_program();

// Evaluate the rule program over a fully populated FactDb and collect one
// Violation per distinct (pattern, scope key), texts merged.
std::vector<Violation> check_form(const facts::FactDb& db);

}  // namespace consent_audit::rules
