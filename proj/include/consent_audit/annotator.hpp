#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "consent_audit/dsl.hpp"
#include "consent_audit/facts.hpp"

namespace consent_audit::annotate {

enum class TextField {
  kRequestText,
  kStaticText,
  kWithdrawal,
  kPurpose,
  kController,
};

const char* to_string(TextField f);
std::optional<TextField> text_field_from_string(const std::string& s);

struct TextEntry {
  std::string uid;
  TextField field;
  std::string text;
};

struct AnnotationRequest {
  std::string form_id;
  std::vector<TextEntry> texts;
};

// Fixed purpose category taxonomy; `other` is the fallback bucket.
const std::vector<std::string>& category_taxonomy();

struct PurposePattern {
  std::string pattern;   // phrase that introduces a purpose clause
  std::string category;  // taxonomy member
};

// Keyword tables driving the deterministic backend. Defaults ship with
// the binary; `.keywords.json` files may override them.
struct KeywordTables {
  std::vector<std::string> action_phrases;
  std::vector<std::string> negative_patterns;
  std::vector<std::string> withdrawal_patterns;
  std::vector<PurposePattern> purpose_patterns;
  std::vector<std::string> controller_lexicon;
  std::vector<std::string> controller_cues;  // "<Entity> <cue>" extraction

  static KeywordTables defaults();
  static KeywordTables from_json(const std::string& json_text);
  std::string to_json() const;
};

// Build the annotation request for a form: request texts, static text
// items, and explicit metadata fields.
AnnotationRequest build_request(const dsl::WebForm& form);

// Deterministic keyword/pattern extraction of the semantic predicates.
std::vector<facts::SemanticFact> annotate_heuristic(
    const AnnotationRequest& req, const KeywordTables& tables);

// For each Action(R, A), emit ActionMapping(E, A) for elements compatible
// with the action phrase: the element carrying R when selectable or a
// button, a button whose label shares tokens with A, else the selectable
// adjacent to the carrier of R.
std::vector<facts::SemanticFact> map_actions(
    const std::vector<facts::SemanticFact>& semantic_facts,
    const dsl::WebForm& form);

struct ServiceConfig {
  std::string url;       // http://host:port/path
  std::string api_key;
  std::string template_version = "v1";
  int max_attempts = 3;
  int backoff_initial_ms = 200;
  int timeout_seconds = 10;

  // CONSENT_AUDIT_ANNOTATOR_URL / CONSENT_AUDIT_ANNOTATOR_KEY
  static std::optional<ServiceConfig> from_environment();
};

// Model-backed annotation over HTTP. Responses failing arity or taxonomy
// validation are dropped with a warning; results are cached per
// (template version, text). Throws TransportError / ProtocolError /
// AuthError.
std::vector<facts::SemanticFact> annotate_remote(const AnnotationRequest& req,
                                                 const ServiceConfig& endpoint,
                                                 std::vector<std::string>* warnings = nullptr);

// Drops facts violating arity or taxonomy invariants; used by both
// backends so the rule engine sees one dialect.
std::vector<facts::SemanticFact> validate_facts(
    const std::vector<facts::SemanticFact>& raw,
    std::vector<std::string>* warnings = nullptr);

// Number of network round-trips performed by annotate_remote since
// process start (cache instrumentation).
std::size_t remote_request_count();
void reset_remote_cache();

}  // namespace consent_audit::annotate
