#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "consent_audit/dsl.hpp"

namespace consent_audit::ingest {

struct HtmlElement {
  int dom_index = 0;  // document order, unique and ascending
  std::string tag;
  std::optional<std::string> input_type;
  std::string text;  // label / placeholder / value, concatenated
  bool required = false;
  bool checked = false;
  std::vector<std::string> css_classes;
  bool inside_form_tag = false;
  bool inside_iframe = false;

  bool operator==(const HtmlElement&) const = default;
};

struct VisualElement {
  int visual_index = 0;
  std::string kind;  // input | checkbox | radio | button | select | static_text | link
  std::string text;
  int segment_index = 0;  // screenshot slice of origin

  bool operator==(const VisualElement&) const = default;
};

struct MatchConfig {
  double threshold = 0.5;
  double text_weight = 0.6;
  double type_weight = 0.4;

  bool valid() const;
};

struct MatchedPair {
  HtmlElement html;
  VisualElement visual;
  double score = 0.0;

  bool operator==(const MatchedPair&) const = default;
};

struct MatchResult {
  std::vector<MatchedPair> matched;
  std::vector<HtmlElement> unmatched_html;
  std::vector<VisualElement> unmatched_visual;
  std::vector<VisualElement> static_context;
};

struct IngestConfig {
  MatchConfig match;
  std::vector<std::string> preselected_classes = {"active", "checked",
                                                  "selected", "on"};
};

// Lenient extraction of interactive and textual elements, including
// elements outside <form> tags and inside same-document iframes. Throws
// IngestError only when the byte stream is not decodable text.
std::vector<HtmlElement> extract_html_elements(
    const std::string& html, const IngestConfig& cfg = {});

// 1 when the element kinds are compatible under the fixed table, else 0.
double type_match(const HtmlElement& h, const VisualElement& v);

// Normalized string similarity: max(token-Jaccard, 1 - normalized edit
// distance) over lowercased, punctuation-stripped text.
double text_match(const HtmlElement& h, const VisualElement& v);

// Greedy weighted matching per the construction algorithm: iterate H in
// dom order, pick the unmatched v maximizing
// type_weight*type_match + text_weight*text_match, accept when the score
// is strictly greater than the threshold; ties break to the lowest
// visual_index. The merged form keeps visual order first, html-only
// items after, and carries structural attributes onto the items.
std::pair<MatchResult, dsl::WebForm> construct_form(
    const std::vector<HtmlElement>& html_elements,
    const std::vector<VisualElement>& visual_elements,
    const MatchConfig& cfg, const std::string& form_id = "form");

// `.visual.json`: array of {visual_index, kind, text, segment_index}.
std::vector<VisualElement> parse_visual_elements(const std::string& json_text);

dsl::ItemType item_type_for(const HtmlElement& h);

}  // namespace consent_audit::ingest
