#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "consent_audit/dsl.hpp"
#include "consent_audit/rules.hpp"

namespace consent_audit::report {

struct FormReport {
  std::string form_id;
  std::optional<std::string> source_url;
  std::vector<rules::Violation> violations;
  std::string annotator_backend = "heuristic";
  std::string config_fingerprint;
  std::string timestamp;  // ISO 8601 UTC

  bool compliant() const { return violations.empty(); }
};

// Current UTC time as "YYYY-MM-DDThh:mm:ssZ".
std::string now_utc();

FormReport emit_report(const dsl::WebForm& form,
                       std::vector<rules::Violation> violations,
                       const std::string& annotator_backend,
                       const std::string& config_fingerprint,
                       const std::string& timestamp);

std::string serialize_report(const FormReport& report);
FormReport parse_report(const std::string& json_text);

struct WebsiteRate {
  // pattern relation name -> fraction of the site's forms violating it
  std::map<std::string, double> per_pattern;
  double rate = 0.0;  // mean of the 7 per-pattern entries
};

// All reports must come from one website. Throws EmptyInput.
WebsiteRate website_rate(const std::vector<FormReport>& reports);

std::map<std::string, double> category_rate(
    const std::map<std::string, double>& site_rates,
    const std::map<std::string, std::set<std::string>>& site_categories);

// (k distinct patterns, cumulative fraction of forms with <= k patterns),
// listed for every k that occurs plus the terminal point. Throws EmptyInput.
std::vector<std::pair<int, double>> cooccurrence_cdf(
    const std::vector<FormReport>& reports);

struct PiiKeywordTable {
  // pii type -> label phrases
  std::map<std::string, std::vector<std::string>> keywords;

  static PiiKeywordTable defaults();
};

std::set<std::string> classify_pii(const dsl::WebForm& form,
                                   const PiiKeywordTable& table);

struct ScoredForm {
  FormReport report;
  std::set<std::string> pii;  // classify_pii output for the form
};

// fraction of forms violating a rule of the principle that collect the
// pii type; principles with no violating forms are absent
std::map<std::pair<std::string, std::string>, double> pii_distribution(
    const std::vector<ScoredForm>& forms);

struct CorpusMetrics {
  std::map<std::string, WebsiteRate> per_website;
  std::map<std::string, double> per_category;
  std::vector<std::pair<int, double>> cdf;
  std::map<std::pair<std::string, std::string>, double> pii;
  std::vector<std::string> errors;  // per-form failures, "<path>: <message>"
};

CorpusMetrics compute_metrics(
    const std::map<std::string, std::vector<ScoredForm>>& forms_by_site,
    const std::map<std::string, std::set<std::string>>& site_categories);

std::string metrics_to_json(const CorpusMetrics& metrics);
std::string website_rates_csv(const CorpusMetrics& metrics);

}  // namespace consent_audit::report
