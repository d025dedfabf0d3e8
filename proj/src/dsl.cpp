#include "consent_audit/dsl.hpp"

#include <json.hpp>

#include <set>

#include "consent_audit/errors.hpp"

// nlohmann::json with std::map keeps object keys sorted, which is exactly
// the canonical order the format requires.
using json = nlohmann::json;

namespace consent_audit::dsl {

namespace {

const std::string kEmpty;

struct TypeName {
  ItemType type;
  const char* name;
};

constexpr TypeName kTypeNames[] = {
    {ItemType::kTextbox, "textbox"},
    {ItemType::kButton, "button"},
    {ItemType::kCheckbox, "checkbox"},
    {ItemType::kCombobox, "combobox"},
    {ItemType::kToggle, "toggle"},
    {ItemType::kRadio, "radio"},
    {ItemType::kStaticText, "staticText"},
    {ItemType::kLink, "link"},
    {ItemType::kIframeBoundary, "iframe_boundary"},
};

}  // namespace

const char* to_string(ItemType t) {
  for (const auto& tn : kTypeNames)
    if (tn.type == t) return tn.name;
  return "?";
}

std::optional<ItemType> item_type_from_string(const std::string& s) {
  for (const auto& tn : kTypeNames)
    if (s == tn.name) return tn.type;
  return std::nullopt;
}

bool is_select_type(ItemType t) {
  return t == ItemType::kCheckbox || t == ItemType::kRadio ||
         t == ItemType::kToggle || t == ItemType::kCombobox;
}

const std::string& Item::text() const {
  if (metadata && metadata->request_text) return metadata->request_text->text;
  return kEmpty;
}

namespace {

std::optional<std::string> opt_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SyntaxError(std::string(key) + " must be a string");
  return it->get<std::string>();
}

Metadata parse_metadata(const json& m) {
  Metadata out;
  out.action = opt_string(m, "action");
  out.purpose = opt_string(m, "purpose");
  out.controller = opt_string(m, "controller");
  out.withdrawal = opt_string(m, "withdrawal");
  if (auto it = m.find("request_text"); it != m.end() && !it->is_null()) {
    if (!it->is_object()) throw SyntaxError("request_text must be an object");
    RequestText rt;
    auto t = opt_string(*it, "text");
    rt.text = t.value_or("");
    if (auto p = opt_string(*it, "polarity")) {
      if (*p == "affirmative")
        rt.polarity = Polarity::kAffirmative;
      else if (*p == "negative")
        rt.polarity = Polarity::kNegative;
      else
        throw ValidationError("polarity must be affirmative or negative, got \"" +
                              *p + "\"");
    }
    out.request_text = std::move(rt);
  }
  return out;
}

json metadata_to_json(const Metadata& m) {
  json out = json::object();
  if (m.action) out["action"] = *m.action;
  if (m.purpose) out["purpose"] = *m.purpose;
  if (m.controller) out["controller"] = *m.controller;
  if (m.withdrawal) out["withdrawal"] = *m.withdrawal;
  if (m.request_text) {
    json rt = json::object();
    rt["text"] = m.request_text->text;
    if (m.request_text->polarity)
      rt["polarity"] = *m.request_text->polarity == Polarity::kAffirmative
                           ? "affirmative"
                           : "negative";
    out["request_text"] = std::move(rt);
  }
  return out;
}

void require_valid(const WebForm& form) {
  auto issues = validate_form(form);
  if (!issues.empty())
    throw ValidationError(issues.front().path + ": " + issues.front().message);
}

}  // namespace

WebForm parse_form(const std::string& serialized) {
  json doc;
  try {
    doc = json::parse(serialized);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("malformed form document: ") + e.what());
  }
  if (!doc.is_object()) throw SyntaxError("form document must be an object");

  WebForm form;
  auto id = opt_string(doc, "form_id");
  if (!id) throw SyntaxError("missing form_id");
  form.form_id = *id;
  form.source_url = opt_string(doc, "source_url");

  auto items = doc.find("items");
  if (items == doc.end() || !items->is_array())
    throw SyntaxError("items must be an array");
  for (const auto& it : *items) {
    if (!it.is_object()) throw SyntaxError("item must be an object");
    Item item;
    auto uid = opt_string(it, "uid");
    if (!uid) throw SyntaxError("item missing uid");
    item.uid = *uid;
    auto type = opt_string(it, "type");
    if (!type) throw SyntaxError("item missing type");
    auto parsed = item_type_from_string(*type);
    if (!parsed) throw ValidationError("unknown item type \"" + *type + "\"");
    item.type = *parsed;
    if (auto m = it.find("metadata"); m != it.end() && !m->is_null())
      item.metadata = parse_metadata(*m);
    if (auto c = it.find("checked"); c != it.end() && c->is_boolean())
      item.checked = c->get<bool>();
    if (auto r = it.find("required"); r != it.end() && r->is_boolean())
      item.required = r->get<bool>();
    form.items.push_back(std::move(item));
  }

  require_valid(form);
  return form;
}

std::string serialize_form(const WebForm& form) {
  json doc = json::object();
  doc["form_id"] = form.form_id;
  doc["source_url"] = form.source_url ? json(*form.source_url) : json(nullptr);
  json items = json::array();
  for (const auto& item : form.items) {
    json it = json::object();
    it["uid"] = item.uid;
    it["type"] = to_string(item.type);
    it["metadata"] = item.metadata ? metadata_to_json(*item.metadata)
                                   : json(nullptr);
    if (item.checked) it["checked"] = true;
    if (item.required) it["required"] = true;
    items.push_back(std::move(it));
  }
  doc["items"] = std::move(items);
  return doc.dump(2) + "\n";
}

std::vector<ValidationIssue> validate_form(const WebForm& form) {
  std::vector<ValidationIssue> issues;
  if (form.items.empty())
    issues.push_back({"items", "form has no items"});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < form.items.size(); ++i) {
    const auto& item = form.items[i];
    const std::string path = "items[" + std::to_string(i) + "]";
    if (item.uid.empty()) issues.push_back({path + ".uid", "uid is empty"});
    if (!seen.insert(item.uid).second)
      issues.push_back({path + ".uid", "duplicate uid \"" + item.uid + "\""});
    if (item.metadata) {
      if (item.metadata->empty())
        issues.push_back({path + ".metadata", "metadata present but empty"});
      if (item.metadata->request_text && item.metadata->request_text->text.empty())
        issues.push_back(
            {path + ".metadata.request_text", "request text is empty"});
    }
  }
  return issues;
}

}  // namespace consent_audit::dsl
