#include "consent_audit/config.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "consent_audit/errors.hpp"

using json = nlohmann::json;

namespace consent_audit::config {

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.preselected_classes = ingest::IngestConfig{}.preselected_classes;
  cfg.keywords = annotate::KeywordTables::defaults();
  cfg.pii = report::PiiKeywordTable::defaults();
  return cfg;
}

namespace {

const char* backend_name(AnnotatorBackend b) {
  return b == AnnotatorBackend::kHeuristic ? "heuristic" : "remote";
}

AnnotatorBackend backend_from(const std::string& s) {
  if (s == "heuristic") return AnnotatorBackend::kHeuristic;
  if (s == "remote") return AnnotatorBackend::kRemote;
  throw ValidationError("unknown annotator backend \"" + s + "\"");
}

void apply_key(RunConfig& cfg, const std::string& key, const json& value) {
  auto str_list = [&](std::vector<std::string>& out) {
    out.clear();
    for (const auto& v : value) out.push_back(v.get<std::string>());
  };
  if (key == "annotator")
    cfg.annotator = backend_from(value.get<std::string>());
  else if (key == "threshold")
    cfg.match.threshold = value.get<double>();
  else if (key == "text_weight")
    cfg.match.text_weight = value.get<double>();
  else if (key == "type_weight")
    cfg.match.type_weight = value.get<double>();
  else if (key == "preselected_classes")
    str_list(cfg.preselected_classes);
  else if (key == "select_types")
    str_list(cfg.base_facts.select_types);
  else if (key == "submit_keywords")
    str_list(cfg.base_facts.submit_keywords);
  else if (key == "keyword_tables")
    cfg.keywords = annotate::KeywordTables::from_json(value.dump());
  else if (key == "parallelism") {
    cfg.parallelism = value.get<int>();
    if (cfg.parallelism < 1)
      throw ValidationError("parallelism must be >= 1");
  } else if (key == "output_dir")
    cfg.output_dir = value.get<std::string>();
  else
    throw ValidationError("unknown config key \"" + key + "\"");
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  RunConfig cfg = RunConfig::defaults();
  try {
    for (const auto& [key, value] : doc.items()) apply_key(cfg, key, value);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config value: ") + e.what());
  }
  if (!cfg.match.valid())
    throw ValidationError("matching weights must be positive and threshold in [0,1)");
  return cfg;
}

// Flat `key = value` lines; values are strings, numbers, or [ ... ] arrays
// of strings. Comments start with '#'.
RunConfig parse_config_toml(const std::string& text) {
  json doc = json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
      return s;
    };
    sv = trim(sv);
    if (sv.empty() || sv.front() == '#') continue;
    std::size_t eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw SyntaxError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    std::string key(trim(sv.substr(0, eq)));
    std::string_view val = trim(sv.substr(eq + 1));
    if (val.empty())
      throw SyntaxError("config line " + std::to_string(lineno) +
                        ": missing value");
    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"')
        throw SyntaxError("config line " + std::to_string(lineno) +
                          ": unterminated string");
      doc[key] = std::string(val.substr(1, val.size() - 2));
    } else if (val.front() == '[') {
      if (val.back() != ']')
        throw SyntaxError("config line " + std::to_string(lineno) +
                          ": unterminated array");
      json arr = json::array();
      std::string inner(val.substr(1, val.size() - 2));
      std::istringstream items(inner);
      std::string item;
      while (std::getline(items, item, ',')) {
        std::string_view iv = trim(item);
        if (iv.empty()) continue;
        if (iv.size() < 2 || iv.front() != '"' || iv.back() != '"')
          throw SyntaxError("config line " + std::to_string(lineno) +
                            ": array items must be quoted strings");
        arr.push_back(std::string(iv.substr(1, iv.size() - 2)));
      }
      doc[key] = arr;
    } else {
      try {
        if (val.find('.') != std::string_view::npos)
          doc[key] = std::stod(std::string(val));
        else
          doc[key] = std::stoll(std::string(val));
      } catch (const std::exception&) {
        throw SyntaxError("config line " + std::to_string(lineno) +
                          ": unrecognized value \"" + std::string(val) + "\"");
      }
    }
  }
  return parse_config_json(doc.dump());
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml")
    return parse_config_toml(buf.str());
  return parse_config_json(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  json doc;
  doc["annotator"] = backend_name(cfg.annotator);
  doc["threshold"] = cfg.match.threshold;
  doc["text_weight"] = cfg.match.text_weight;
  doc["type_weight"] = cfg.match.type_weight;
  doc["preselected_classes"] = cfg.preselected_classes;
  doc["select_types"] = cfg.base_facts.select_types;
  doc["submit_keywords"] = cfg.base_facts.submit_keywords;
  doc["keyword_tables"] = json::parse(cfg.keywords.to_json());
  json pii = json::object();
  for (const auto& [type, phrases] : cfg.pii.keywords) pii[type] = phrases;
  doc["pii_keywords"] = pii;
  doc["parallelism"] = cfg.parallelism;
  doc["output_dir"] = cfg.output_dir;
  return doc.dump();
}

std::string fingerprint(const RunConfig& cfg) {
  const std::string canonical = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace consent_audit::config
