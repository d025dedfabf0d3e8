#include "consent_audit/annotator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "consent_audit/errors.hpp"
#include "consent_audit/text.hpp"

using json = nlohmann::json;

namespace consent_audit::annotate {

const char* to_string(TextField f) {
  switch (f) {
    case TextField::kRequestText: return "request_text";
    case TextField::kStaticText: return "static_text";
    case TextField::kWithdrawal: return "withdrawal";
    case TextField::kPurpose: return "purpose";
    case TextField::kController: return "controller";
  }
  return "?";
}

std::optional<TextField> text_field_from_string(const std::string& s) {
  if (s == "request_text") return TextField::kRequestText;
  if (s == "static_text") return TextField::kStaticText;
  if (s == "withdrawal") return TextField::kWithdrawal;
  if (s == "purpose") return TextField::kPurpose;
  if (s == "controller") return TextField::kController;
  return std::nullopt;
}

const std::vector<std::string>& category_taxonomy() {
  static const std::vector<std::string> kCategories = {
      "marketing_communication", "newsletter",       "third_party_sharing",
      "analytics",               "account_or_service", "contact_response",
      "policy_agreement",        "other"};
  return kCategories;
}

KeywordTables KeywordTables::defaults() {
  KeywordTables t;
  t.action_phrases = {"tick this box", "tick the box",  "check this box",
                      "check the box", "click subscribe", "sign up",
                      "subscribe",     "submit",         "click"};
  t.negative_patterns = {"rather not receive", "rather not", "do not want",
                         "don't want",         "do not wish", "if you don't",
                         "unless you",         "uncheck"};
  t.withdrawal_patterns = {"unsubscribe",
                           "withdraw your consent",
                           "withdraw consent",
                           "withdraw at any time",
                           "opt out",
                           "opt-out",
                           "change your mind at any time",
                           "change your preferences"};
  t.purpose_patterns = {
      {"email you about", "marketing_communication"},
      {"marketing communications", "marketing_communication"},
      {"marketing emails", "marketing_communication"},
      {"promotional", "marketing_communication"},
      {"special offers", "marketing_communication"},
      {"exclusive offers", "marketing_communication"},
      {"about our products", "marketing_communication"},
      {"newsletter", "newsletter"},
      {"third party", "third_party_sharing"},
      {"third parties", "third_party_sharing"},
      {"share my data", "third_party_sharing"},
      {"share your data", "third_party_sharing"},
      {"analytics", "analytics"},
      {"create your account", "account_or_service"},
      {"provide the service", "account_or_service"},
      {"process your order", "account_or_service"},
      {"contact you about", "contact_response"},
      {"contacted about", "contact_response"},
      {"respond to your inquiry", "contact_response"},
      {"about my inquiry", "contact_response"},
      {"privacy policy", "policy_agreement"},
      {"terms and conditions", "policy_agreement"},
  };
  t.controller_lexicon = {"Hearst UK"};
  t.controller_cues = {"is the data controller", "acts as the data controller",
                       "processes your data", "will process your data"};
  return t;
}

KeywordTables KeywordTables::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("malformed keyword table: ") + e.what());
  }
  KeywordTables t = defaults();
  auto strings = [&](const char* key, std::vector<std::string>& out) {
    if (auto it = doc.find(key); it != doc.end()) {
      out.clear();
      for (const auto& v : *it) out.push_back(v.get<std::string>());
    }
  };
  strings("action_phrases", t.action_phrases);
  strings("negative_patterns", t.negative_patterns);
  strings("withdrawal_patterns", t.withdrawal_patterns);
  strings("controller_lexicon", t.controller_lexicon);
  strings("controller_cues", t.controller_cues);
  if (auto it = doc.find("purpose_patterns"); it != doc.end()) {
    t.purpose_patterns.clear();
    for (const auto& p : *it)
      t.purpose_patterns.push_back(
          {p.at("pattern").get<std::string>(),
           p.at("category").get<std::string>()});
  }
  return t;
}

std::string KeywordTables::to_json() const {
  json doc;
  doc["action_phrases"] = action_phrases;
  doc["negative_patterns"] = negative_patterns;
  doc["withdrawal_patterns"] = withdrawal_patterns;
  doc["controller_lexicon"] = controller_lexicon;
  doc["controller_cues"] = controller_cues;
  json pp = json::array();
  for (const auto& p : purpose_patterns)
    pp.push_back({{"pattern", p.pattern}, {"category", p.category}});
  doc["purpose_patterns"] = pp;
  return doc.dump(2) + "\n";
}

AnnotationRequest build_request(const dsl::WebForm& form) {
  AnnotationRequest req;
  req.form_id = form.form_id;
  for (const auto& item : form.items) {
    if (!item.metadata) continue;
    const auto& m = *item.metadata;
    if (m.request_text && !m.request_text->text.empty())
      req.texts.push_back({item.uid,
                           item.type == dsl::ItemType::kStaticText
                               ? TextField::kStaticText
                               : TextField::kRequestText,
                           m.request_text->text});
    if (m.withdrawal)
      req.texts.push_back({item.uid, TextField::kWithdrawal, *m.withdrawal});
    if (m.purpose)
      req.texts.push_back({item.uid, TextField::kPurpose, *m.purpose});
    if (m.controller)
      req.texts.push_back({item.uid, TextField::kController, *m.controller});
  }
  return req;
}

namespace {

std::size_t find_ci(const std::string& haystack, const std::string& needle,
                    std::size_t from = 0) {
  if (needle.empty()) return std::string::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(haystack[i + k])) !=
          std::tolower(static_cast<unsigned char>(needle[k]))) {
        ok = false;
        break;
      }
    if (ok) return i;
  }
  return std::string::npos;
}

// Clause from the pattern position to the end of the sentence.
std::string clause_from(const std::string& text, std::size_t offset) {
  std::size_t end = offset;
  while (end < text.size() && text[end] != '.' && text[end] != '!' &&
         text[end] != '?' && text[end] != '\n')
    ++end;
  std::string out = text.substr(offset, end - offset);
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back())))
    out.pop_back();
  return out;
}

std::string categorize(const std::string& purpose_text,
                       const KeywordTables& tables) {
  for (const auto& p : tables.purpose_patterns)
    if (find_ci(purpose_text, p.pattern) != std::string::npos)
      return p.category;
  return "other";
}

// Maximal trailing run of capitalized tokens directly before `cue_pos`.
std::string entity_before(const std::string& raw, std::size_t cue_pos) {
  static const std::set<std::string> kSuffixes = {
      "Ltd", "Ltd.", "Inc", "Inc.", "LLC", "UK", "GmbH", "Co", "Co.", "Corp",
      "Corp.", "AG", "SA", "BV"};
  // tokenize the prefix
  std::vector<std::string> words;
  std::string cur;
  for (std::size_t i = 0; i < cue_pos; ++i) {
    char c = raw[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  std::vector<std::string> entity;
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    const std::string& w = *it;
    bool capitalized =
        !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
    if (capitalized || kSuffixes.count(w)) {
      entity.insert(entity.begin(), w);
    } else {
      break;
    }
  }
  std::string out;
  for (const auto& w : entity) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  // strip a trailing sentence period
  while (!out.empty() && out.back() == ',') out.pop_back();
  return out;
}

void extract_purposes(const std::string& uid_anchor, const std::string& raw,
                      const KeywordTables& tables,
                      std::set<facts::SemanticFact>& out) {
  for (const auto& p : tables.purpose_patterns) {
    std::size_t pos = find_ci(raw, p.pattern);
    if (pos == std::string::npos) continue;
    std::string clause = clause_from(raw, pos);
    if (clause.empty()) continue;
    out.insert({facts::Predicate::kPurpose, {uid_anchor, clause}});
    out.insert({facts::Predicate::kCategory, {uid_anchor, p.category, clause}});
  }
}

void extract_withdrawal(const std::string& anchor, const std::string& raw,
                        const KeywordTables& tables,
                        std::set<facts::SemanticFact>& out) {
  for (const auto& pat : tables.withdrawal_patterns) {
    std::size_t pos = find_ci(raw, pat);
    if (pos == std::string::npos) continue;
    std::string clause = clause_from(raw, pos);
    out.insert({facts::Predicate::kWithdraw,
                {anchor, clause.empty() ? raw : clause}});
    return;  // one method per text
  }
}

void extract_controller(const std::string& raw, const KeywordTables& tables,
                        std::set<facts::SemanticFact>& out) {
  for (const auto& org : tables.controller_lexicon)
    if (find_ci(raw, org) != std::string::npos)
      out.insert({facts::Predicate::kController, {org}});
  for (const auto& cue : tables.controller_cues) {
    std::size_t pos = find_ci(raw, cue);
    if (pos == std::string::npos) continue;
    std::string entity = entity_before(raw, pos);
    if (!entity.empty())
      out.insert({facts::Predicate::kController, {entity}});
  }
}

}  // namespace

std::vector<facts::SemanticFact> annotate_heuristic(
    const AnnotationRequest& req, const KeywordTables& tables) {
  std::set<facts::SemanticFact> out;  // dedup + deterministic order

  // Anchor purpose/withdrawal metadata of an item to its request text so
  // the purpose relation joins with element_sent.
  std::map<std::string, std::string> anchor;
  for (const auto& e : req.texts)
    if (e.field == TextField::kRequestText) anchor[e.uid] = e.text;

  for (const auto& e : req.texts) {
    const std::string anchored =
        anchor.count(e.uid) ? anchor[e.uid] : e.text;
    switch (e.field) {
      case TextField::kRequestText: {
        for (const auto& phrase : tables.action_phrases)
          if (find_ci(e.text, phrase) != std::string::npos)
            out.insert({facts::Predicate::kAction, {e.text, phrase}});
        bool negative = false;
        for (const auto& pat : tables.negative_patterns)
          if (find_ci(e.text, pat) != std::string::npos) {
            negative = true;
            break;
          }
        if (!negative)
          out.insert({facts::Predicate::kPolarityAffirmative, {e.text}});
        extract_purposes(e.text, e.text, tables, out);
        extract_withdrawal(e.text, e.text, tables, out);
        extract_controller(e.text, tables, out);
        break;
      }
      case TextField::kStaticText:
        extract_purposes(e.text, e.text, tables, out);
        extract_withdrawal(e.text, e.text, tables, out);
        extract_controller(e.text, tables, out);
        break;
      case TextField::kWithdrawal: {
        std::set<facts::SemanticFact> found;
        extract_withdrawal(e.text, e.text, tables, found);
        if (found.empty())
          out.insert({facts::Predicate::kWithdraw, {e.text, e.text}});
        else
          out.insert(found.begin(), found.end());
        break;
      }
      case TextField::kPurpose:
        out.insert({facts::Predicate::kPurpose, {anchored, e.text}});
        out.insert({facts::Predicate::kCategory,
                    {anchored, categorize(e.text, tables), e.text}});
        break;
      case TextField::kController:
        out.insert({facts::Predicate::kController, {e.text}});
        break;
    }
  }
  return {out.begin(), out.end()};
}

namespace {

bool is_selectable_or_button(const dsl::Item& item) {
  return dsl::is_select_type(item.type) ||
         item.type == dsl::ItemType::kButton;
}

}  // namespace

std::vector<facts::SemanticFact> map_actions(
    const std::vector<facts::SemanticFact>& semantic_facts,
    const dsl::WebForm& form) {
  std::set<facts::SemanticFact> out;
  for (const auto& f : semantic_facts) {
    if (f.predicate != facts::Predicate::kAction) continue;
    const std::string& request = f.terms[0];
    const std::string& action = f.terms[1];

    // 1) the element that carries the request text itself
    const dsl::Item* carrier = nullptr;
    std::size_t carrier_pos = 0;
    for (std::size_t i = 0; i < form.items.size(); ++i) {
      const auto& item = form.items[i];
      if (item.text() == request) {
        carrier = &item;
        carrier_pos = i;
        break;
      }
    }
    bool mapped = false;
    if (carrier && is_selectable_or_button(*carrier)) {
      out.insert({facts::Predicate::kActionMapping, {carrier->uid, action}});
      mapped = true;
    }

    // 2) buttons whose label shares tokens with the action phrase
    auto action_tokens = text::tokens(text::normalize(action));
    for (const auto& item : form.items) {
      if (item.type != dsl::ItemType::kButton) continue;
      auto label_tokens = text::tokens(text::normalize(item.text()));
      for (const auto& t : label_tokens)
        if (std::find(action_tokens.begin(), action_tokens.end(), t) !=
            action_tokens.end()) {
          out.insert({facts::Predicate::kActionMapping, {item.uid, action}});
          mapped = true;
          break;
        }
    }

    // 3) fall back to the selectable adjacent to the carrier
    if (!mapped && carrier) {
      const dsl::Item* adjacent = nullptr;
      for (std::size_t d = 1; d < form.items.size() && !adjacent; ++d) {
        if (carrier_pos + d < form.items.size() &&
            dsl::is_select_type(form.items[carrier_pos + d].type))
          adjacent = &form.items[carrier_pos + d];
        else if (carrier_pos >= d &&
                 dsl::is_select_type(form.items[carrier_pos - d].type))
          adjacent = &form.items[carrier_pos - d];
      }
      if (adjacent)
        out.insert({facts::Predicate::kActionMapping, {adjacent->uid, action}});
    }
  }
  return {out.begin(), out.end()};
}

std::vector<facts::SemanticFact> validate_facts(
    const std::vector<facts::SemanticFact>& raw,
    std::vector<std::string>* warnings) {
  std::vector<facts::SemanticFact> out;
  const auto& taxonomy = category_taxonomy();
  for (const auto& f : raw) {
    if (f.terms.size() != facts::predicate_arity(f.predicate)) {
      if (warnings)
        warnings->push_back(std::string("dropped ") +
                            facts::relation_name(f.predicate) +
                            " fact with arity " +
                            std::to_string(f.terms.size()));
      continue;
    }
    if (f.predicate == facts::Predicate::kCategory &&
        std::find(taxonomy.begin(), taxonomy.end(), f.terms[1]) ==
            taxonomy.end()) {
      if (warnings)
        warnings->push_back("dropped category fact with unknown category \"" +
                            f.terms[1] + "\"");
      continue;
    }
    out.push_back(f);
  }
  return out;
}

// ----------------------------------------------------------- remote backend

std::optional<ServiceConfig> ServiceConfig::from_environment() {
  const char* url = std::getenv("CONSENT_AUDIT_ANNOTATOR_URL");
  if (!url || !*url) return std::nullopt;
  ServiceConfig cfg;
  cfg.url = url;
  if (const char* key = std::getenv("CONSENT_AUDIT_ANNOTATOR_KEY"))
    cfg.api_key = key;
  return cfg;
}

namespace {

struct RemoteCache {
  std::mutex mutex;
  std::unordered_map<std::string, std::vector<facts::SemanticFact>> entries;
  std::size_t request_count = 0;
};

RemoteCache& remote_cache() {
  static RemoteCache cache;
  return cache;
}

std::optional<facts::Predicate> predicate_from_string(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(
      static_cast<unsigned char>(c))));
  if (l == "action") return facts::Predicate::kAction;
  if (l == "purpose") return facts::Predicate::kPurpose;
  if (l == "actionmapping" || l == "action_mapping")
    return facts::Predicate::kActionMapping;
  if (l == "category") return facts::Predicate::kCategory;
  if (l == "controller") return facts::Predicate::kController;
  if (l == "withdraw") return facts::Predicate::kWithdraw;
  if (l == "polarity" || l == "polarityaffirmative" ||
      l == "polarity_affirmative")
    return facts::Predicate::kPolarityAffirmative;
  return std::nullopt;
}

}  // namespace

std::vector<facts::SemanticFact> annotate_remote(
    const AnnotationRequest& req, const ServiceConfig& endpoint,
    std::vector<std::string>* warnings) {
  if (endpoint.url.empty())
    throw TransportError("no annotation service configured");

  // split url into host part and path
  std::string rest = endpoint.url;
  std::string scheme = "http://";
  if (rest.rfind("http://", 0) == 0)
    rest = rest.substr(7);
  else if (rest.rfind("https://", 0) == 0) {
    scheme = "https://";
    rest = rest.substr(8);
  }
  std::size_t slash = rest.find('/');
  std::string host = scheme + rest.substr(0, slash == std::string::npos
                                                 ? rest.size()
                                                 : slash);
  std::string path =
      slash == std::string::npos ? std::string("/") : rest.substr(slash);

  // resolve cache hits first; only uncached texts go on the wire
  std::vector<TextEntry> pending;
  std::vector<facts::SemanticFact> cached;
  auto cache_key = [&](const TextEntry& e) {
    return endpoint.template_version + '\x1f' + to_string(e.field) + '\x1f' +
           e.text;
  };
  {
    std::lock_guard lock(remote_cache().mutex);
    for (const auto& e : req.texts) {
      auto it = remote_cache().entries.find(cache_key(e));
      if (it == remote_cache().entries.end())
        pending.push_back(e);
      else
        cached.insert(cached.end(), it->second.begin(), it->second.end());
    }
  }

  std::vector<facts::SemanticFact> fetched;
  if (!pending.empty()) {
    json body;
    body["template"] = "semantic_predicates";
    body["version"] = endpoint.template_version;
    json texts = json::array();
    for (const auto& e : pending)
      texts.push_back(
          {{"uid", e.uid}, {"field", to_string(e.field)}, {"text", e.text}});
    body["texts"] = texts;
    const std::string payload = body.dump();

    httplib::Client client(host);
    client.set_connection_timeout(endpoint.timeout_seconds, 0);
    client.set_read_timeout(endpoint.timeout_seconds, 0);
    httplib::Headers headers;
    if (!endpoint.api_key.empty())
      headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    httplib::Result res;
    std::string last_error;
    int backoff = endpoint.backoff_initial_ms;
    for (int attempt = 0; attempt < endpoint.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      {
        std::lock_guard lock(remote_cache().mutex);
        ++remote_cache().request_count;
      }
      res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403)
        throw AuthError("annotation service rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
      if (res->status >= 200 && res->status < 300) break;
      last_error = "HTTP " + std::to_string(res->status);
      res = httplib::Result();
    }
    if (!res)
      throw TransportError("annotation service unreachable after " +
                           std::to_string(endpoint.max_attempts) +
                           " attempts: " + last_error);

    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("malformed annotator response: ") +
                          e.what());
    }
    if (!doc.is_object() || !doc.contains("facts") ||
        !doc["facts"].is_array())
      throw ProtocolError("annotator response is missing the facts array");
    for (const auto& f : doc["facts"]) {
      if (!f.is_object() || !f.contains("predicate") || !f.contains("terms"))
        throw ProtocolError("annotator fact is missing predicate or terms");
      auto pred = predicate_from_string(f["predicate"].get<std::string>());
      if (!pred) {
        if (warnings)
          warnings->push_back("dropped fact with unknown predicate \"" +
                              f["predicate"].get<std::string>() + "\"");
        continue;
      }
      facts::SemanticFact fact;
      fact.predicate = *pred;
      for (const auto& t : f["terms"]) fact.terms.push_back(t.get<std::string>());
      fetched.push_back(std::move(fact));
    }
    fetched = validate_facts(fetched, warnings);

    // attribute fetched facts to the pending text they mention for caching;
    // facts without a matching text land on every pending entry's bucket key
    {
      std::lock_guard lock(remote_cache().mutex);
      for (const auto& e : pending) {
        auto& bucket = remote_cache().entries[cache_key(e)];
        bucket.clear();
        for (const auto& fact : fetched)
          for (const auto& term : fact.terms)
            if (term == e.text || term == e.uid) {
              bucket.push_back(fact);
              break;
            }
      }
    }
  }

  std::set<facts::SemanticFact> merged(cached.begin(), cached.end());
  merged.insert(fetched.begin(), fetched.end());
  return {merged.begin(), merged.end()};
}

std::size_t remote_request_count() {
  std::lock_guard lock(remote_cache().mutex);
  return remote_cache().request_count;
}

void reset_remote_cache() {
  std::lock_guard lock(remote_cache().mutex);
  remote_cache().entries.clear();
  remote_cache().request_count = 0;
}

}  // namespace consent_audit::annotate
