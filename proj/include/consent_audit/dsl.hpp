#pragma once

#include <optional>
#include <string>
#include <vector>

namespace consent_audit::dsl {

enum class ItemType {
  kTextbox,
  kButton,
  kCheckbox,
  kCombobox,
  kToggle,
  kRadio,
  kStaticText,
  kLink,
  kIframeBoundary,
};

// Closed set; unknown role strings are rejected at parse time.
const char* to_string(ItemType t);
std::optional<ItemType> item_type_from_string(const std::string& s);
bool is_select_type(ItemType t);

enum class Polarity { kAffirmative, kNegative };

struct RequestText {
  std::string text;  // non-empty
  std::optional<Polarity> polarity;

  bool operator==(const RequestText&) const = default;
};

struct Metadata {
  std::optional<std::string> action;
  std::optional<std::string> purpose;
  std::optional<std::string> controller;
  std::optional<std::string> withdrawal;
  std::optional<RequestText> request_text;

  bool empty() const {
    return !action && !purpose && !controller && !withdrawal && !request_text;
  }
  bool operator==(const Metadata&) const = default;
};

struct Item {
  std::string uid;
  ItemType type = ItemType::kStaticText;
  std::optional<Metadata> metadata;
  // Structural attributes carried over from the HTML element. Serialized
  // only when non-default so canonical documents stay minimal.
  bool checked = false;
  bool required = false;

  // Label / request text of the item, empty when none.
  const std::string& text() const;

  bool operator==(const Item&) const = default;
};

struct ValidationIssue {
  std::string path;  // e.g. "items[2].metadata"
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct WebForm {
  std::string form_id;
  std::optional<std::string> source_url;
  std::vector<Item> items;  // non-empty, uids distinct

  bool operator==(const WebForm&) const = default;
};

// Canonical JSON (`.form.json`). Throws SyntaxError on malformed documents
// and ValidationError when the parsed form breaks a type invariant.
WebForm parse_form(const std::string& serialized);

// Canonical serialization: keys sorted, items in original order, trailing
// newline. parse_form(serialize_form(f)) == f.
std::string serialize_form(const WebForm& form);

// Empty result iff all invariants hold; never throws.
std::vector<ValidationIssue> validate_form(const WebForm& form);

}  // namespace consent_audit::dsl
