#pragma once

#include <string>
#include <vector>

#include "consent_audit/annotator.hpp"
#include "consent_audit/facts.hpp"
#include "consent_audit/ingest.hpp"
#include "consent_audit/report.hpp"

namespace consent_audit::config {

enum class AnnotatorBackend { kHeuristic, kRemote };

struct RunConfig {
  AnnotatorBackend annotator = AnnotatorBackend::kHeuristic;
  ingest::MatchConfig match;
  std::vector<std::string> preselected_classes;
  facts::BaseFactConfig base_facts;
  annotate::KeywordTables keywords;
  report::PiiKeywordTable pii;
  int parallelism = 1;
  std::string output_dir = ".";

  static RunConfig defaults();
};

// Loads a `.json` or `.toml` config file; unknown keys are rejected.
// TOML support covers the flat key = value subset used by our configs.
RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text);
RunConfig parse_config_toml(const std::string& text);

// Stable 64-bit FNV-1a digest of the canonical config serialization,
// embedded in every report.
std::string fingerprint(const RunConfig& cfg);

std::string serialize_config(const RunConfig& cfg);

}  // namespace consent_audit::config
