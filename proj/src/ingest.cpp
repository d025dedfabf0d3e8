#include "consent_audit/ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "consent_audit/errors.hpp"
#include "consent_audit/text.hpp"

using json = nlohmann::json;

namespace consent_audit::ingest {

bool MatchConfig::valid() const {
  return threshold >= 0.0 && threshold <= 1.0 && text_weight >= 0.0 &&
         type_weight >= 0.0 &&
         std::abs(text_weight + type_weight - 1.0) < 1e-9;
}

namespace {

bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    if (c == 0) return false;
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3
                      : (c >> 3) == 0x1E             ? 4
                                                     : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    i += len;
  }
  return true;
}

struct Attr {
  std::string name;
  std::string value;
  bool has_value = false;
};

struct Tag {
  std::string name;
  bool closing = false;
  bool self_closing = false;
  std::vector<Attr> attrs;

  const Attr* find(const std::string& n) const {
    for (const auto& a : attrs)
      if (a.name == n) return &a;
    return nullptr;
  }
  std::string attr(const std::string& n) const {
    const Attr* a = find(n);
    return a ? a->value : "";
  }
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Tags whose text nodes become standalone static-text elements.
bool static_text_tag(const std::string& t) {
  return t == "p" || t == "span" || t == "label" || t == "legend" ||
         t == "li" || t == "div" || t == "td" || t == "strong" ||
         t == "em" || t == "b" || t == "i" || t == "small" ||
         (t.size() == 2 && t[0] == 'h' && t[1] >= '1' && t[1] <= '6');
}

// Lenient, stack-light HTML reader; enough for form extraction.
class HtmlScanner {
 public:
  HtmlScanner(const std::string& html, const IngestConfig& cfg)
      : html_(html), cfg_(cfg) {}

  std::vector<HtmlElement> run() {
    while (pos_ < html_.size()) {
      if (html_[pos_] == '<') {
        handle_markup();
      } else {
        std::size_t next = html_.find('<', pos_);
        if (next == std::string::npos) next = html_.size();
        handle_text(html_.substr(pos_, next - pos_));
        pos_ = next;
      }
    }
    flush_container();
    return std::move(out_);
  }

 private:
  void handle_markup() {
    if (html_.compare(pos_, 4, "<!--") == 0) {
      std::size_t end = html_.find("-->", pos_);
      pos_ = end == std::string::npos ? html_.size() : end + 3;
      return;
    }
    if (html_.compare(pos_, 2, "<!") == 0 || html_.compare(pos_, 2, "<?") == 0) {
      std::size_t end = html_.find('>', pos_);
      pos_ = end == std::string::npos ? html_.size() : end + 1;
      return;
    }
    Tag tag;
    if (!parse_tag(tag)) return;

    if (tag.closing) {
      on_close(tag.name);
      return;
    }
    on_open(tag);
    if (tag.self_closing) on_close(tag.name);
  }

  bool parse_tag(Tag& tag) {
    std::size_t i = pos_ + 1;
    if (i < html_.size() && html_[i] == '/') {
      tag.closing = true;
      ++i;
    }
    std::size_t name_start = i;
    while (i < html_.size() &&
           (std::isalnum(static_cast<unsigned char>(html_[i])) ||
            html_[i] == '-'))
      ++i;
    tag.name = lower(html_.substr(name_start, i - name_start));
    if (tag.name.empty()) {  // stray '<'
      ++pos_;
      return false;
    }
    // attributes
    while (i < html_.size() && html_[i] != '>') {
      if (html_[i] == '/' && i + 1 < html_.size() && html_[i + 1] == '>') {
        tag.self_closing = true;
        ++i;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(html_[i]))) {
        ++i;
        continue;
      }
      Attr attr;
      std::size_t astart = i;
      while (i < html_.size() && html_[i] != '=' && html_[i] != '>' &&
             html_[i] != '/' &&
             !std::isspace(static_cast<unsigned char>(html_[i])))
        ++i;
      attr.name = lower(html_.substr(astart, i - astart));
      if (i < html_.size() && html_[i] == '=') {
        ++i;
        attr.has_value = true;
        if (i < html_.size() && (html_[i] == '"' || html_[i] == '\'')) {
          char quote = html_[i++];
          std::size_t vstart = i;
          while (i < html_.size() && html_[i] != quote) ++i;
          attr.value = html_.substr(vstart, i - vstart);
          if (i < html_.size()) ++i;
        } else {
          std::size_t vstart = i;
          while (i < html_.size() && html_[i] != '>' &&
                 !std::isspace(static_cast<unsigned char>(html_[i])))
            ++i;
          attr.value = html_.substr(vstart, i - vstart);
        }
      }
      if (!attr.name.empty()) tag.attrs.push_back(std::move(attr));
    }
    pos_ = i < html_.size() ? i + 1 : html_.size();
    // void elements never nest
    if (!tag.closing &&
        (tag.name == "input" || tag.name == "br" || tag.name == "img" ||
         tag.name == "hr" || tag.name == "meta" || tag.name == "link"))
      tag.self_closing = true;
    return true;
  }

  void skip_raw_content(const std::string& tag) {
    std::string close = "</" + tag;
    std::size_t end = find_ci(close, pos_);
    if (end == std::string::npos) {
      pos_ = html_.size();
      return;
    }
    std::size_t gt = html_.find('>', end);
    pos_ = gt == std::string::npos ? html_.size() : gt + 1;
  }

  std::size_t find_ci(const std::string& needle, std::size_t from) const {
    for (std::size_t i = from; i + needle.size() <= html_.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < needle.size(); ++k)
        if (std::tolower(static_cast<unsigned char>(html_[i + k])) !=
            needle[k]) {
          ok = false;
          break;
        }
      if (ok) return i;
    }
    return std::string::npos;
  }

  bool preselected_class(const std::vector<std::string>& classes) const {
    for (const auto& c : classes)
      for (const auto& p : cfg_.preselected_classes)
        if (lower(c) == lower(p)) return true;
    return false;
  }

  static std::vector<std::string> split_classes(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

  HtmlElement base_element(const Tag& tag) {
    HtmlElement el;
    el.dom_index = next_index_++;
    el.tag = tag.name;
    el.css_classes = split_classes(tag.attr("class"));
    el.inside_form_tag = form_depth_ > 0;
    el.inside_iframe = iframe_depth_ > 0;
    el.required = tag.find("required") != nullptr;
    el.checked =
        tag.find("checked") != nullptr || preselected_class(el.css_classes);
    return el;
  }

  static void append_text(std::string& dst, const std::string& piece) {
    std::string t = trim(piece);
    if (t.empty()) return;
    if (!dst.empty()) dst.push_back(' ');
    dst += t;
  }

  void on_open(const Tag& tag) {
    const std::string& name = tag.name;
    if (name == "script" || name == "style") {
      skip_raw_content(name);
      return;
    }
    if (name == "form") { ++form_depth_; return; }
    if (name == "iframe") { ++iframe_depth_; return; }

    if (name == "input") {
      HtmlElement el = base_element(tag);
      el.input_type = tag.find("type") ? std::optional(lower(tag.attr("type")))
                                       : std::nullopt;
      append_text(el.text, tag.attr("aria-label"));
      append_text(el.text, tag.attr("placeholder"));
      if (el.input_type &&
          (*el.input_type == "submit" || *el.input_type == "button"))
        append_text(el.text, tag.attr("value"));
      out_.push_back(std::move(el));
      return;
    }
    if (name == "button" || name == "a" || name == "textarea" ||
        name == "select" || name == "option") {
      if (name == "option") return;  // text accrues to the open select
      flush_container();
      container_ = base_element(tag);
      if (name == "textarea") append_text(container_->text, tag.attr("placeholder"));
      append_text(container_->text, tag.attr("aria-label"));
      return;
    }
    if (static_text_tag(name)) text_stack_.push_back(name);
  }

  void on_close(const std::string& name) {
    if (name == "form") { if (form_depth_) --form_depth_; return; }
    if (name == "iframe") { if (iframe_depth_) --iframe_depth_; return; }
    if (container_ && container_->tag == name) {
      flush_container();
      return;
    }
    if (!text_stack_.empty() && text_stack_.back() == name)
      text_stack_.pop_back();
  }

  void flush_container() {
    if (!container_) return;
    out_.push_back(std::move(*container_));
    container_.reset();
  }

  void handle_text(const std::string& raw) {
    std::string t = trim(raw);
    if (t.empty()) return;
    if (container_) {
      append_text(container_->text, t);
      return;
    }
    if (text_stack_.empty()) return;  // bare body text: ignore
    HtmlElement el;
    el.dom_index = next_index_++;
    el.tag = text_stack_.back();
    el.text = t;
    el.inside_form_tag = form_depth_ > 0;
    el.inside_iframe = iframe_depth_ > 0;
    out_.push_back(std::move(el));
  }

  const std::string& html_;
  const IngestConfig& cfg_;
  std::size_t pos_ = 0;
  int next_index_ = 0;
  int form_depth_ = 0;
  int iframe_depth_ = 0;
  std::vector<std::string> text_stack_;
  std::optional<HtmlElement> container_;
  std::vector<HtmlElement> out_;
};

}  // namespace

std::vector<HtmlElement> extract_html_elements(const std::string& html,
                                               const IngestConfig& cfg) {
  if (!valid_utf8(html))
    throw IngestError("input is not decodable UTF-8 text");
  return HtmlScanner(html, cfg).run();
}

namespace {

bool textual_input(const HtmlElement& h) {
  if (h.tag == "textarea") return true;
  if (h.tag != "input") return false;
  if (!h.input_type) return true;
  const std::string& t = *h.input_type;
  return t == "text" || t == "email" || t == "tel" || t == "number" ||
         t == "password" || t == "search" || t == "url" || t == "date";
}

bool button_like(const HtmlElement& h) {
  if (h.tag == "button") return true;
  return h.tag == "input" && h.input_type &&
         (*h.input_type == "submit" || *h.input_type == "button" ||
          *h.input_type == "image");
}

}  // namespace

double type_match(const HtmlElement& h, const VisualElement& v) {
  const std::string k = lower(v.kind);
  if (textual_input(h)) return k == "input" || k == "textbox" ? 1.0 : 0.0;
  if (h.tag == "input" && h.input_type && *h.input_type == "checkbox")
    return k == "checkbox" || k == "toggle" ? 1.0 : 0.0;
  if (h.tag == "input" && h.input_type && *h.input_type == "radio")
    return k == "radio" ? 1.0 : 0.0;
  if (button_like(h)) return k == "button" ? 1.0 : 0.0;
  if (h.tag == "select")
    return k == "select" || k == "combobox" || k == "dropdown" ? 1.0 : 0.0;
  if (h.tag == "a") return k == "link" ? 1.0 : 0.0;
  if (static_text_tag(h.tag)) return k == "static_text" ? 1.0 : 0.0;
  return 0.0;
}

double text_match(const HtmlElement& h, const VisualElement& v) {
  return text::similarity(h.text, v.text);
}

dsl::ItemType item_type_for(const HtmlElement& h) {
  if (h.tag == "input" && h.input_type) {
    if (*h.input_type == "checkbox") return dsl::ItemType::kCheckbox;
    if (*h.input_type == "radio") return dsl::ItemType::kRadio;
    if (*h.input_type == "submit" || *h.input_type == "button" ||
        *h.input_type == "image")
      return dsl::ItemType::kButton;
  }
  if (h.tag == "button") return dsl::ItemType::kButton;
  if (h.tag == "select") return dsl::ItemType::kCombobox;
  if (h.tag == "a") return dsl::ItemType::kLink;
  if (h.tag == "input" || h.tag == "textarea") return dsl::ItemType::kTextbox;
  return dsl::ItemType::kStaticText;
}

std::pair<MatchResult, dsl::WebForm> construct_form(
    const std::vector<HtmlElement>& html_elements,
    const std::vector<VisualElement>& visual_elements, const MatchConfig& cfg,
    const std::string& form_id) {
  std::vector<HtmlElement> hs = html_elements;
  std::sort(hs.begin(), hs.end(), [](const auto& a, const auto& b) {
    return a.dom_index < b.dom_index;
  });
  std::vector<VisualElement> vs = visual_elements;
  std::sort(vs.begin(), vs.end(), [](const auto& a, const auto& b) {
    return a.visual_index < b.visual_index;
  });

  MatchResult result;
  std::vector<bool> taken(vs.size(), false);
  std::vector<int> match_of_h(hs.size(), -1);

  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    double best_score = cfg.threshold;
    int best_v = -1;
    for (std::size_t vi = 0; vi < vs.size(); ++vi) {
      if (taken[vi]) continue;
      double s = cfg.type_weight * type_match(hs[hi], vs[vi]) +
                 cfg.text_weight * text_match(hs[hi], vs[vi]);
      if (s > best_score) {  // strict: ties keep the lowest visual_index
        best_score = s;
        best_v = static_cast<int>(vi);
      }
    }
    if (best_v >= 0) {
      taken[best_v] = true;
      match_of_h[hi] = best_v;
      result.matched.push_back({hs[hi], vs[best_v], best_score});
    }
  }

  for (std::size_t hi = 0; hi < hs.size(); ++hi)
    if (match_of_h[hi] < 0) result.unmatched_html.push_back(hs[hi]);
  for (std::size_t vi = 0; vi < vs.size(); ++vi)
    if (!taken[vi]) {
      result.unmatched_visual.push_back(vs[vi]);
      if (lower(vs[vi].kind) == "static_text")
        result.static_context.push_back(vs[vi]);
    }

  // Merge, preserving visual order; html-only items follow in dom order.
  struct Draft {
    int segment;
    int order;  // visual_index or dom_index
    bool html_only;
    dsl::ItemType type;
    std::string text;
    bool checked = false;
    bool required = false;
  };
  std::vector<Draft> drafts;
  for (const auto& m : result.matched) {
    Draft d;
    d.segment = m.visual.segment_index;
    d.order = m.visual.visual_index;
    d.html_only = false;
    d.type = item_type_for(m.html);
    d.text = !m.html.text.empty() ? m.html.text : m.visual.text;
    d.checked = m.html.checked;
    d.required = m.html.required;
    drafts.push_back(std::move(d));
  }
  for (const auto& v : result.static_context)
    drafts.push_back({v.segment_index, v.visual_index, false,
                      dsl::ItemType::kStaticText, v.text});
  for (const auto& h : result.unmatched_html)
    drafts.push_back({0, h.dom_index, true, item_type_for(h), h.text,
                      h.checked, h.required});

  std::stable_sort(drafts.begin(), drafts.end(),
                   [](const Draft& a, const Draft& b) {
                     if (a.html_only != b.html_only) return !a.html_only;
                     if (a.html_only) return a.order < b.order;
                     return std::tie(a.segment, a.order) <
                            std::tie(b.segment, b.order);
                   });

  dsl::WebForm form;
  form.form_id = form_id;
  int uid = 0;
  for (const auto& d : drafts) {
    dsl::Item item;
    item.uid = "u" + std::to_string(uid++);
    item.type = d.type;
    item.checked = d.checked;
    item.required = d.required;
    if (!d.text.empty()) {
      dsl::Metadata m;
      m.request_text = dsl::RequestText{d.text, std::nullopt};
      item.metadata = std::move(m);
    }
    form.items.push_back(std::move(item));
  }
  return {std::move(result), std::move(form)};
}

std::vector<VisualElement> parse_visual_elements(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string("malformed visual element file: ") + e.what());
  }
  if (!doc.is_array())
    throw IngestError("visual element file must be a JSON array");
  std::vector<VisualElement> out;
  for (const auto& o : doc) {
    VisualElement v;
    v.visual_index = o.value("visual_index", 0);
    v.kind = o.value("kind", "");
    v.text = o.value("text", "");
    v.segment_index = o.value("segment_index", 0);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace consent_audit::ingest
