#include "consent_audit/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <sstream>

#include "consent_audit/errors.hpp"
#include "consent_audit/text.hpp"

using json = nlohmann::ordered_json;

namespace consent_audit::report {

std::string now_utc() {
  std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

FormReport emit_report(const dsl::WebForm& form,
                       std::vector<rules::Violation> violations,
                       const std::string& annotator_backend,
                       const std::string& config_fingerprint,
                       const std::string& timestamp) {
  FormReport r;
  r.form_id = form.form_id;
  r.source_url = form.source_url;
  r.violations = std::move(violations);
  r.annotator_backend = annotator_backend;
  r.config_fingerprint = config_fingerprint;
  r.timestamp = timestamp;
  return r;
}

namespace {

json violation_to_json(const rules::Violation& v) {
  json out;
  out["pattern"] = rules::to_string(v.pattern_id);
  json ids = json::array();
  for (auto id : v.rule_ids) ids.push_back(rules::to_string(id));
  out["rules"] = ids;
  out["principle"] = rules::to_string(v.principle);
  out["provision"] = v.provision;
  out["scope"] = rules::to_string(v.scope);
  if (v.scope == rules::Scope::kElementLevel) {
    out["element_uid"] = v.element_uid;
    out["element_type"] = v.element_type;
  }
  if (v.scope == rules::Scope::kPurposeLevel) out["purpose"] = v.purpose;
  out["request_texts"] = v.request_texts;
  return out;
}

rules::PatternId pattern_from_string(const std::string& s) {
  for (const auto& p : rules::pattern_table())
    if (s == rules::to_string(p.pattern_id)) return p.pattern_id;
  throw ValidationError("unknown violation pattern \"" + s + "\"");
}

rules::RuleId rule_from_string(const std::string& s) {
  for (const auto& m : rules::rule_table())
    if (s == rules::to_string(m.rule_id)) return m.rule_id;
  throw ValidationError("unknown rule id \"" + s + "\"");
}

rules::Principle principle_from_string(const std::string& s) {
  for (auto p : {rules::Principle::kFreelyGiven,
                 rules::Principle::kSpecificInformed,
                 rules::Principle::kUnambiguous})
    if (s == rules::to_string(p)) return p;
  throw ValidationError("unknown principle \"" + s + "\"");
}

rules::Scope scope_from_string(const std::string& s) {
  for (auto sc : {rules::Scope::kFormLevel, rules::Scope::kElementLevel,
                  rules::Scope::kPurposeLevel})
    if (s == rules::to_string(sc)) return sc;
  throw ValidationError("unknown scope \"" + s + "\"");
}

}  // namespace

std::string serialize_report(const FormReport& report) {
  json out;
  out["form_id"] = report.form_id;
  if (report.source_url)
    out["source_url"] = *report.source_url;
  else
    out["source_url"] = nullptr;
  json vs = json::array();
  for (const auto& v : report.violations) vs.push_back(violation_to_json(v));
  out["violations"] = vs;
  out["annotator_backend"] = report.annotator_backend;
  out["config_fingerprint"] = report.config_fingerprint;
  out["timestamp"] = report.timestamp;
  return out.dump(2) + "\n";
}

FormReport parse_report(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SyntaxError(std::string("malformed report: ") + e.what());
  }
  FormReport r;
  try {
    r.form_id = doc.at("form_id").get<std::string>();
    if (doc.contains("source_url") && !doc["source_url"].is_null())
      r.source_url = doc["source_url"].get<std::string>();
    for (const auto& jv : doc.at("violations")) {
      rules::Violation v;
      v.pattern_id = pattern_from_string(jv.at("pattern").get<std::string>());
      for (const auto& id : jv.at("rules"))
        v.rule_ids.push_back(rule_from_string(id.get<std::string>()));
      v.principle = principle_from_string(jv.at("principle").get<std::string>());
      v.provision = jv.at("provision").get<std::string>();
      v.scope = scope_from_string(jv.at("scope").get<std::string>());
      if (jv.contains("element_uid"))
        v.element_uid = jv["element_uid"].get<std::string>();
      if (jv.contains("element_type"))
        v.element_type = jv["element_type"].get<std::string>();
      if (jv.contains("purpose")) v.purpose = jv["purpose"].get<std::string>();
      for (const auto& t : jv.at("request_texts"))
        v.request_texts.push_back(t.get<std::string>());
      r.violations.push_back(std::move(v));
    }
    r.annotator_backend = doc.at("annotator_backend").get<std::string>();
    r.config_fingerprint = doc.at("config_fingerprint").get<std::string>();
    r.timestamp = doc.at("timestamp").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid report: ") + e.what());
  }
  return r;
}

WebsiteRate website_rate(const std::vector<FormReport>& reports) {
  if (reports.empty()) throw EmptyInput("website_rate over zero reports");
  WebsiteRate out;
  for (const auto& p : rules::pattern_table()) {
    std::size_t violating = 0;
    for (const auto& r : reports)
      if (std::any_of(r.violations.begin(), r.violations.end(),
                      [&](const rules::Violation& v) {
                        return v.pattern_id == p.pattern_id;
                      }))
        ++violating;
    out.per_pattern[rules::to_string(p.pattern_id)] =
        static_cast<double>(violating) / static_cast<double>(reports.size());
  }
  for (const auto& [_, v] : out.per_pattern) out.rate += v;
  out.rate /= static_cast<double>(out.per_pattern.size());
  return out;
}

std::map<std::string, double> category_rate(
    const std::map<std::string, double>& site_rates,
    const std::map<std::string, std::set<std::string>>& site_categories) {
  std::map<std::string, double> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& [site, rate] : site_rates) {
    auto it = site_categories.find(site);
    if (it == site_categories.end() || it->second.empty()) continue;
    for (const auto& cat : it->second) {
      sums[cat] += rate;
      ++counts[cat];
    }
  }
  std::map<std::string, double> out;
  for (const auto& [cat, sum] : sums)
    out[cat] = sum / static_cast<double>(counts[cat]);
  return out;
}

std::vector<std::pair<int, double>> cooccurrence_cdf(
    const std::vector<FormReport>& reports) {
  if (reports.empty()) throw EmptyInput("cooccurrence_cdf over zero reports");
  std::map<int, std::size_t> by_k;
  for (const auto& r : reports) {
    std::set<rules::PatternId> distinct;
    for (const auto& v : r.violations) distinct.insert(v.pattern_id);
    ++by_k[static_cast<int>(distinct.size())];
  }
  std::vector<std::pair<int, double>> out;
  std::size_t cumulative = 0;
  for (const auto& [k, n] : by_k) {
    cumulative += n;
    out.push_back({k, static_cast<double>(cumulative) /
                          static_cast<double>(reports.size())});
  }
  return out;
}

PiiKeywordTable PiiKeywordTable::defaults() {
  PiiKeywordTable t;
  t.keywords = {
      {"email", {"email", "e mail"}},
      {"first_name", {"first name", "given name", "forename"}},
      {"last_name", {"last name", "surname", "family name"}},
      {"full_name", {"full name", "your name"}},
      {"phone", {"phone", "telephone", "mobile"}},
      {"company", {"company", "organization", "organisation", "employer"}},
      {"postal_address",
       {"address", "street", "city", "zip", "postcode", "postal code",
        "country"}},
      {"financial",
       {"credit card", "card number", "iban", "account number", "payment"}},
      {"demographic",
       {"age", "gender", "date of birth", "birthday", "nationality"}},
  };
  return t;
}

std::set<std::string> classify_pii(const dsl::WebForm& form,
                                   const PiiKeywordTable& table) {
  std::set<std::string> out;
  for (const auto& item : form.items) {
    if (item.type != dsl::ItemType::kTextbox &&
        item.type != dsl::ItemType::kCombobox)
      continue;
    std::string label = text::normalize(item.text());
    if (label.empty()) continue;
    if (label == "name") {
      out.insert("full_name");
      continue;
    }
    bool matched = false;
    for (const auto& [type, phrases] : table.keywords)
      for (const auto& phrase : phrases)
        if (text::contains_phrase(label, text::normalize(phrase))) {
          out.insert(type);
          matched = true;
          break;
        }
    if (!matched) out.insert("other");
  }
  return out;
}

std::map<std::pair<std::string, std::string>, double> pii_distribution(
    const std::vector<ScoredForm>& forms) {
  std::map<std::string, std::size_t> violating_forms;
  std::map<std::pair<std::string, std::string>, std::size_t> collecting;
  for (const auto& f : forms) {
    std::set<std::string> principles;
    for (const auto& v : f.report.violations)
      principles.insert(rules::to_string(v.principle));
    for (const auto& p : principles) {
      ++violating_forms[p];
      for (const auto& pii : f.pii) ++collecting[{p, pii}];
    }
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [key, n] : collecting)
    out[key] = static_cast<double>(n) /
               static_cast<double>(violating_forms[key.first]);
  return out;
}

CorpusMetrics compute_metrics(
    const std::map<std::string, std::vector<ScoredForm>>& forms_by_site,
    const std::map<std::string, std::set<std::string>>& site_categories) {
  CorpusMetrics m;
  std::map<std::string, double> site_rates;
  std::vector<FormReport> all_reports;
  std::vector<ScoredForm> all_forms;
  for (const auto& [site, forms] : forms_by_site) {
    if (forms.empty()) continue;
    std::vector<FormReport> reports;
    for (const auto& f : forms) {
      reports.push_back(f.report);
      all_reports.push_back(f.report);
      all_forms.push_back(f);
    }
    m.per_website[site] = website_rate(reports);
    site_rates[site] = m.per_website[site].rate;
  }
  m.per_category = category_rate(site_rates, site_categories);
  if (!all_reports.empty()) m.cdf = cooccurrence_cdf(all_reports);
  m.pii = pii_distribution(all_forms);
  return m;
}

std::string metrics_to_json(const CorpusMetrics& metrics) {
  json out;
  json sites = json::object();
  for (const auto& [site, wr] : metrics.per_website) {
    json s;
    s["patterns"] = wr.per_pattern;
    s["rate"] = wr.rate;
    sites[site] = s;
  }
  out["per_website"] = sites;
  out["per_category"] = metrics.per_category;
  json cdf = json::array();
  for (const auto& [k, frac] : metrics.cdf) cdf.push_back({k, frac});
  out["cooccurrence_cdf"] = cdf;
  json pii = json::object();
  for (const auto& [key, frac] : metrics.pii) pii[key.first][key.second] = frac;
  out["pii_distribution"] = pii;
  out["errors"] = metrics.errors;
  return out.dump(2) + "\n";
}

std::string website_rates_csv(const CorpusMetrics& metrics) {
  std::ostringstream out;
  out << "website";
  for (const auto& p : rules::pattern_table())
    out << ',' << rules::to_string(p.pattern_id);
  out << ",rate\n";
  for (const auto& [site, wr] : metrics.per_website) {
    out << site;
    for (const auto& p : rules::pattern_table())
      out << ',' << wr.per_pattern.at(rules::to_string(p.pattern_id));
    out << ',' << wr.rate << '\n';
  }
  return out.str();
}

}  // namespace consent_audit::report
