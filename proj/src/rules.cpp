#include "consent_audit/rules.hpp"

#include <algorithm>
#include <map>

#include "consent_audit/errors.hpp"

namespace consent_audit::rules {

const char* to_string(RuleId id) {
  switch (id) {
    case RuleId::P1: return "P1";
    case RuleId::P2: return "P2";
    case RuleId::P3: return "P3";
    case RuleId::P4: return "P4";
    case RuleId::P5: return "P5";
    case RuleId::P6: return "P6";
    case RuleId::P7: return "P7";
    case RuleId::P8: return "P8";
    case RuleId::P9: return "P9";
  }
  return "?";
}

const char* to_string(Principle p) {
  switch (p) {
    case Principle::kFreelyGiven: return "freely_given";
    case Principle::kSpecificInformed: return "specific_informed";
    case Principle::kUnambiguous: return "unambiguous";
  }
  return "?";
}

const char* to_string(PatternId id) {
  switch (id) {
    case PatternId::kGenuineChoice: return "GenuineChoice";
    case PatternId::kSeparateConsent: return "SeparateConsent";
    case PatternId::kWithdrawalInformed: return "WithdrawalInformed";
    case PatternId::kDataControllerSpecified: return "DataControllerSpecified";
    case PatternId::kPurposeSpecified: return "PurposeSpecified";
    case PatternId::kConsentPreselected: return "ConsentPreselected";
    case PatternId::kOptOutConsent: return "OptOutConsent";
  }
  return "?";
}

const char* to_string(Scope s) {
  switch (s) {
    case Scope::kFormLevel: return "form_level";
    case Scope::kElementLevel: return "element_level";
    case Scope::kPurposeLevel: return "purpose_level";
  }
  return "?";
}

const std::vector<RuleMeta>& rule_table() {
  static const std::vector<RuleMeta> kTable = {
      {RuleId::P1, Principle::kFreelyGiven,
       "ICO valid consent guidance; GDPR Recital 42",
       "The form text explains the action to provide consent for a specific "
       "purpose, and there is an actionable web element corresponding to the "
       "action mentioned in the text."},
      {RuleId::P2, Principle::kFreelyGiven,
       "ICO valid consent guidance; GDPR Recital 42",
       "Selectable elements are used to represent consent agreements."},
      {RuleId::P3, Principle::kFreelyGiven, "ICO valid consent guidance",
       "If there is only one specific purpose in the web form, then "
       "submitting the form shows consent."},
      {RuleId::P4, Principle::kFreelyGiven,
       "GDPR Article 7(4); Recital 43",
       "Operating on one element should only serve one purpose for consent."},
      {RuleId::P5, Principle::kSpecificInformed, "Recital 42",
       "The consent could be withdrawn by the data subject should be "
       "illustrated when giving consent."},
      {RuleId::P6, Principle::kSpecificInformed, "GDPR Recital 42",
       "On the form, the data controller should be specified."},
      {RuleId::P7, Principle::kSpecificInformed, "GDPR Recital 42",
       "On the form, the data processing purpose should be specified."},
      {RuleId::P8, Principle::kUnambiguous, "GDPR Recital 32",
       "Pre-selected selectable elements showing consent is not allowed."},
      {RuleId::P9, Principle::kUnambiguous, "ICO valid consent guidance",
       "The polarity of consent request should be affirmative instead of "
       "negative."},
  };
  return kTable;
}

const std::vector<ViolationPattern>& pattern_table() {
  static const std::vector<ViolationPattern> kTable = {
      {PatternId::kGenuineChoice,
       {RuleId::P1, RuleId::P2, RuleId::P3},
       Scope::kPurposeLevel,
       "v_genuine_choice"},
      {PatternId::kSeparateConsent,
       {RuleId::P4},
       Scope::kElementLevel,
       "v_separate_consent"},
      {PatternId::kWithdrawalInformed,
       {RuleId::P5},
       Scope::kFormLevel,
       "v_no_withdrawal"},
      {PatternId::kDataControllerSpecified,
       {RuleId::P6},
       Scope::kFormLevel,
       "v_no_controller"},
      {PatternId::kPurposeSpecified,
       {RuleId::P7},
       Scope::kFormLevel,
       "v_no_purpose"},
      {PatternId::kConsentPreselected,
       {RuleId::P8},
       Scope::kElementLevel,
       "v_preselected"},
      {PatternId::kOptOutConsent,
       {RuleId::P9},
       Scope::kElementLevel,
       "v_opt_out"},
  };
  return kTable;
}

const RuleMeta& rule_meta(RuleId id) {
  for (const auto& m : rule_table())
    if (m.rule_id == id) return m;
  throw Error("unknown rule id");
}

const ViolationPattern& pattern(PatternId id) {
  for (const auto& p : pattern_table())
    if (p.pattern_id == id) return p;
  throw Error("unknown pattern id");
}

const std::string& program_source() {
  static const std::string kSource = R"dl(% GDPR consent rule program.
% Base relations are produced from the web form; semantic relations come
% from the annotation layer.

.decl item/3 edb
.decl selected/1 edb
.decl element_sent/2 edb
.decl submit_button/1 edb
.decl is_select_type/1 edb
.decl action/2 edb
.decl purpose/2 edb
.decl action_mapping/2 edb
.decl category/3 edb
.decl controller/1 edb
.decl withdraw/2 edb
.decl polarity_affirmative/1 edb

.decl p1/3 idb
.decl p2/3 idb
.decl consent/3 idb
.decl form_cat/1 idb
.decl elem_cat/2 idb
.decl p3/2 idb
.decl p4/2 idb
.decl p5/0 idb
.decl p6/1 idb
.decl p7/1 idb
.decl p8/1 idb
.decl p9/1 idb
.decl has_path/1 idb
.decl has_controller/0 idb
.decl has_purpose/0 idb
.decl v_genuine_choice/1 idb
.decl v_separate_consent/1 idb
.decl v_no_withdrawal/0 idb
.decl v_no_controller/0 idb
.decl v_no_purpose/0 idb
.decl v_preselected/1 idb
.decl v_opt_out/1 idb

% Consent paths: explicit action (P1) or selectable element (P2).
p1(R, P, E) :- action(R, A), purpose(R, P), action_mapping(E, A), item(E, _, _).
p2(R, P, E) :- purpose(R, P), element_sent(E, R), item(E, T, _), is_select_type(T).
consent(R, P, E) :- (p1(R, P, E) ; p2(R, P, E)).

% Implicit consent via submission requires a single purpose category
% across the whole form.
form_cat(C) :- consent(_, P, _), category(_, C, P).
p3(P, E) :- consent(_, P, _), submit_button(E), count:{ C : form_cat(C) } = 1.

% One category per consent element.
elem_cat(E, C) :- consent(_, P, E), category(_, C, P).
p4(P, E) :- consent(_, P, E), count:{ C : elem_cat(E, C) } = 1.

p5() :- withdraw(_, _).
p6(C) :- controller(C).
p7(P) :- purpose(_, P).
p8(E) :- p2(_, _, E), !selected(E).
p9(E) :- consent(R, _, E), polarity_affirmative(R), item(E, _, _).

% Violation patterns. P1/P2/P3 are alternative satisfiers for a purpose.
has_path(P) :- p1(_, P, _).
has_path(P) :- p2(_, P, _).
has_path(P) :- p3(P, _).
v_genuine_choice(P) :- purpose(_, P), !has_path(P).

v_separate_consent(E) :- consent(_, _, E), count:{ C : elem_cat(E, C) } > 1.

v_no_withdrawal() :- !p5().
has_controller() :- p6(_).
v_no_controller() :- !has_controller().
has_purpose() :- p7(_).
v_no_purpose() :- !has_purpose().

v_preselected(E) :- p2(_, _, E), selected(E).
v_opt_out(E) :- consent(R, _, E), !polarity_affirmative(R), item(E, _, _).
)dl";
  return kSource;
}

const datalog::Program& build_program() {
  static const datalog::Program kProgram = datalog::parse_program(program_source());
  return kProgram;
}

std::vector<Violation> check_form(const facts::FactDb& db) {
  facts::FactDb idb = datalog::evaluate(build_program(), db);

  // element uid -> type, and uid -> request texts, for localization
  std::map<std::string, std::string> item_type;
  for (const auto& t : db.tuples("item")) item_type[t[0]] = t[1];
  std::map<std::string, std::vector<std::string>> sent_texts;
  for (const auto& t : db.tuples("element_sent"))
    sent_texts[t[0]].push_back(t[1]);
  std::map<std::string, std::vector<std::string>> purpose_texts;
  for (const auto& t : db.tuples("purpose"))
    purpose_texts[t[1]].push_back(t[0]);

  std::vector<Violation> out;
  for (const auto& pat : pattern_table()) {
    const RuleMeta& meta = rule_meta(pat.satisfier_rules.front());
    for (const auto& tuple : idb.tuples(pat.relation)) {
      Violation v;
      v.pattern_id = pat.pattern_id;
      v.rule_ids = pat.satisfier_rules;
      v.principle = meta.principle;
      v.scope = pat.scope;
      v.provision = meta.provision;
      switch (pat.scope) {
        case Scope::kElementLevel: {
          v.element_uid = tuple.at(0);
          if (auto it = item_type.find(v.element_uid); it != item_type.end())
            v.element_type = it->second;
          if (auto it = sent_texts.find(v.element_uid); it != sent_texts.end())
            v.request_texts = it->second;
          break;
        }
        case Scope::kPurposeLevel: {
          v.purpose = tuple.at(0);
          if (auto it = purpose_texts.find(v.purpose); it != purpose_texts.end())
            v.request_texts = it->second;
          break;
        }
        case Scope::kFormLevel:
          break;
      }
      std::sort(v.request_texts.begin(), v.request_texts.end());
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace consent_audit::rules
