#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "consent_audit/annotator.hpp"
#include "consent_audit/config.hpp"
#include "consent_audit/datalog.hpp"
#include "consent_audit/dsl.hpp"
#include "consent_audit/errors.hpp"
#include "consent_audit/facts.hpp"
#include "consent_audit/ingest.hpp"
#include "consent_audit/report.hpp"
#include "consent_audit/rules.hpp"

namespace fs = std::filesystem;
using namespace consent_audit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitInputError = 2;
constexpr int kExitInternal = 3;
constexpr int kExitRemoteFailure = 4;

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  if (fs::path(path).has_parent_path())
    fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write to " + path);
}

std::string resolve_timestamp() {
  if (const char* t = std::getenv("CONSENT_AUDIT_TIMESTAMP"); t && *t)
    return t;
  return report::now_utc();
}

// Explicit polarity annotations on the form trump pattern inference.
void apply_polarity_overrides(const dsl::WebForm& form,
                              std::set<facts::SemanticFact>& out) {
  for (const auto& item : form.items) {
    if (!item.metadata || !item.metadata->request_text) continue;
    const auto& rt = *item.metadata->request_text;
    if (!rt.polarity) continue;
    facts::SemanticFact affirmative{facts::Predicate::kPolarityAffirmative,
                                    {rt.text}};
    if (*rt.polarity == dsl::Polarity::kAffirmative)
      out.insert(affirmative);
    else
      out.erase(affirmative);
  }
}

struct AnnotationOutcome {
  std::vector<facts::SemanticFact> facts;
  std::string backend_used;
  std::vector<std::string> warnings;
};

AnnotationOutcome annotate_form(const dsl::WebForm& form,
                                const config::RunConfig& cfg, bool fallback) {
  AnnotationOutcome out;
  auto req = annotate::build_request(form);
  std::vector<facts::SemanticFact> raw;
  if (cfg.annotator == config::AnnotatorBackend::kRemote) {
    auto endpoint = annotate::ServiceConfig::from_environment();
    try {
      if (!endpoint)
        throw TransportError(
            "remote annotator selected but CONSENT_AUDIT_ANNOTATOR_URL is "
            "not set");
      raw = annotate::annotate_remote(req, *endpoint, &out.warnings);
      out.backend_used = "remote";
    } catch (const TransportError& e) {
      if (!fallback) throw;
      out.warnings.push_back(std::string("remote annotator failed (") +
                             e.what() + "); using heuristic backend");
      raw = annotate::annotate_heuristic(req, cfg.keywords);
      out.backend_used = "heuristic";
    }
  } else {
    raw = annotate::annotate_heuristic(req, cfg.keywords);
    out.backend_used = "heuristic";
  }
  std::set<facts::SemanticFact> merged(raw.begin(), raw.end());
  apply_polarity_overrides(form, merged);
  std::vector<facts::SemanticFact> validated = annotate::validate_facts(
      {merged.begin(), merged.end()}, &out.warnings);
  auto mapped = annotate::map_actions(validated, form);
  std::set<facts::SemanticFact> all(validated.begin(), validated.end());
  all.insert(mapped.begin(), mapped.end());
  out.facts.assign(all.begin(), all.end());
  return out;
}

facts::FactDb build_fact_db(const dsl::WebForm& form,
                            const config::RunConfig& cfg,
                            const std::vector<facts::SemanticFact>& semantic) {
  facts::FactDb db = facts::generate_base_facts(form, cfg.base_facts);
  return facts::merge_semantic_facts(std::move(db), semantic);
}

report::FormReport check_one(const dsl::WebForm& form,
                             const config::RunConfig& cfg, bool fallback,
                             const std::string& timestamp) {
  auto annotation = annotate_form(form, cfg, fallback);
  auto db = build_fact_db(form, cfg, annotation.facts);
  auto violations = rules::check_form(db);
  return report::emit_report(form, std::move(violations),
                             annotation.backend_used,
                             config::fingerprint(cfg), timestamp);
}

int map_error(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e) ||
      dynamic_cast<const ProtocolError*>(&e) ||
      dynamic_cast<const AuthError*>(&e))
    return kExitRemoteFailure;
  if (dynamic_cast<const SyntaxError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const IngestError*>(&e) ||
      dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const EmptyInput*>(&e) ||
      dynamic_cast<const IoError*>(&e))
    return kExitInputError;
  return kExitInternal;
}

int cmd_parse(const std::string& html_path, const std::string& visual_path,
              const std::string& out, const config::RunConfig& cfg,
              const std::string& form_id) {
  std::string html = read_file(html_path);
  std::string visual_json = read_file(visual_path);
  ingest::IngestConfig icfg;
  icfg.match = cfg.match;
  icfg.preselected_classes = cfg.preselected_classes;
  auto html_elements = ingest::extract_html_elements(html, icfg);
  auto visual_elements = ingest::parse_visual_elements(visual_json);
  auto [result, form] = ingest::construct_form(html_elements, visual_elements,
                                               cfg.match, form_id);
  auto issues = dsl::validate_form(form);
  if (!issues.empty()) {
    for (const auto& i : issues)
      std::cerr << "error: " << i.path << ": " << i.message << "\n";
    return kExitInputError;
  }
  write_output(out, dsl::serialize_form(form));
  return kExitOk;
}

int cmd_annotate(const std::string& form_path, const std::string& out,
                 const config::RunConfig& cfg, bool fallback) {
  auto form = dsl::parse_form(read_file(form_path));
  auto annotation = annotate_form(form, cfg, fallback);
  nlohmann::ordered_json doc;
  doc["form_id"] = form.form_id;
  doc["backend"] = annotation.backend_used;
  nlohmann::ordered_json fs = nlohmann::ordered_json::array();
  for (const auto& f : annotation.facts)
    fs.push_back({{"predicate", facts::relation_name(f.predicate)},
                  {"terms", f.terms}});
  doc["facts"] = fs;
  doc["warnings"] = annotation.warnings;
  write_output(out, doc.dump(2) + "\n");
  for (const auto& w : annotation.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_facts(const std::string& form_path, const std::string& out_dir,
              const config::RunConfig& cfg, bool fallback) {
  auto form = dsl::parse_form(read_file(form_path));
  auto annotation = annotate_form(form, cfg, fallback);
  auto db = build_fact_db(form, cfg, annotation.facts);
  facts::export_facts(db, out_dir);
  return kExitOk;
}

int cmd_check(const std::string& form_path, const std::string& out,
              const config::RunConfig& cfg, bool fallback) {
  auto form = dsl::parse_form(read_file(form_path));
  auto rep = check_one(form, cfg, fallback, resolve_timestamp());
  write_output(out, report::serialize_report(rep));
  return rep.compliant() ? kExitOk : kExitViolations;
}

std::map<std::string, std::set<std::string>> load_categories(
    const fs::path& csv_path) {
  std::map<std::string, std::set<std::string>> out;
  std::ifstream in(csv_path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string site;
    if (!std::getline(fields, site, ',')) continue;
    std::string cat;
    while (std::getline(fields, cat, ','))
      if (!cat.empty()) out[site].insert(cat);
  }
  return out;
}

int cmd_corpus(const std::string& dir, const config::RunConfig& cfg,
               bool fallback) {
  if (!fs::is_directory(dir)) {
    std::cerr << "error: " << dir << " is not a directory\n";
    return kExitInputError;
  }
  std::vector<fs::path> form_paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 10 &&
        name.substr(name.size() - 10) == ".form.json")
      form_paths.push_back(entry.path());
  }
  std::sort(form_paths.begin(), form_paths.end());
  if (form_paths.empty()) {
    std::cerr << "error: no .form.json files under " << dir << "\n";
    return kExitInputError;
  }

  const std::string timestamp = resolve_timestamp();
  struct Slot {
    bool ok = false;
    report::ScoredForm scored;
    std::string error;
  };
  std::vector<Slot> slots(form_paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= form_paths.size()) return;
      try {
        auto form = dsl::parse_form(read_file(form_paths[i].string()));
        auto rep = check_one(form, cfg, fallback, timestamp);
        slots[i].scored.report = std::move(rep);
        slots[i].scored.pii = report::classify_pii(form, cfg.pii);
        slots[i].ok = true;
      } catch (const std::exception& e) {
        slots[i].error =
            fs::relative(form_paths[i], dir).string() + ": " + e.what();
      }
    }
  };
  std::size_t threads = std::min<std::size_t>(
      std::max(cfg.parallelism, 1), form_paths.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::map<std::string, std::vector<report::ScoredForm>> by_site;
  report::CorpusMetrics metrics;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < form_paths.size(); ++i) {
    if (!slots[i].ok) {
      metrics.errors.push_back(slots[i].error);
      ++failures;
      continue;
    }
    const fs::path rel = fs::relative(form_paths[i], dir);
    const std::string site =
        rel.has_parent_path() ? rel.begin()->string() : "unknown";
    by_site[site].push_back(slots[i].scored);
    fs::path out_path = fs::path(cfg.output_dir) / rel;
    out_path.replace_extension();  // strip .json
    out_path.replace_extension(".report.json");
    write_output(out_path.string(),
                 report::serialize_report(slots[i].scored.report));
  }
  if (failures == form_paths.size()) {
    for (const auto& e : metrics.errors) std::cerr << "error: " << e << "\n";
    return kExitInputError;
  }

  auto categories = load_categories(fs::path(dir) / "categories.csv");
  auto errors = std::move(metrics.errors);
  metrics = report::compute_metrics(by_site, categories);
  metrics.errors = std::move(errors);
  write_output((fs::path(cfg.output_dir) / "metrics.json").string(),
               report::metrics_to_json(metrics));
  write_output((fs::path(cfg.output_dir) / "website_rates.csv").string(),
               report::website_rates_csv(metrics));
  return kExitOk;
}

int cmd_rules_dump(const std::string& out, const std::string& format) {
  try {
    if (format == "json") {
      nlohmann::ordered_json doc;
      nlohmann::ordered_json rs = nlohmann::ordered_json::array();
      for (const auto& m : rules::rule_table())
        rs.push_back({{"rule", rules::to_string(m.rule_id)},
                      {"principle", rules::to_string(m.principle)},
                      {"provision", m.provision},
                      {"description", m.description}});
      doc["rules"] = rs;
      nlohmann::ordered_json ps = nlohmann::ordered_json::array();
      for (const auto& p : rules::pattern_table()) {
        nlohmann::ordered_json sat = nlohmann::ordered_json::array();
        for (auto id : p.satisfier_rules) sat.push_back(rules::to_string(id));
        ps.push_back({{"pattern", rules::to_string(p.pattern_id)},
                      {"satisfier_rules", sat},
                      {"scope", rules::to_string(p.scope)},
                      {"relation", p.relation}});
      }
      doc["patterns"] = ps;
      doc["program"] = rules::program_source();
      write_output(out, doc.dump(2) + "\n");
    } else {
      write_output(out, rules::program_source());
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GDPR consent-form compliance auditor"};
  app.require_subcommand(1);

  std::string config_path;
  std::string annotator_flag;
  std::string output_dir;
  int jobs = 0;
  app.add_option("--config", config_path, "config file (.json or .toml)");
  app.add_option("--annotator", annotator_flag)
      ->check(CLI::IsMember({"heuristic", "remote"}));
  app.add_option("--output", output_dir, "output directory");
  app.add_option("--jobs", jobs, "corpus worker count")
      ->check(CLI::PositiveNumber);
  bool fallback = false;
  app.add_flag("--fallback", fallback,
               "fall back to the heuristic backend on remote failure");

  auto* parse_cmd = app.add_subcommand("parse", "reconstruct a form from html + visual elements");
  std::string html_path, visual_path, parse_out = "-", form_id = "form";
  parse_cmd->add_option("--html", html_path)->required();
  parse_cmd->add_option("--visual", visual_path)->required();
  parse_cmd->add_option("--out", parse_out);
  parse_cmd->add_option("--form-id", form_id);

  auto* annotate_cmd = app.add_subcommand("annotate", "derive semantic facts for a form");
  std::string annotate_form_path, annotate_out = "-";
  annotate_cmd->add_option("form", annotate_form_path)->required();
  annotate_cmd->add_option("--out", annotate_out);

  auto* facts_cmd = app.add_subcommand("facts", "export the full fact database of a form");
  std::string facts_form_path, facts_out = "facts";
  facts_cmd->add_option("form", facts_form_path)->required();
  facts_cmd->add_option("--out", facts_out);

  auto* check_cmd = app.add_subcommand("check", "evaluate the rules and report violations");
  std::string check_form_path, check_out = "-";
  check_cmd->add_option("form", check_form_path)->required();
  check_cmd->add_option("--out", check_out);

  auto* corpus_cmd = app.add_subcommand("corpus", "audit a directory of <website>/<form>.form.json files");
  std::string corpus_dir;
  corpus_cmd->add_option("dir", corpus_dir)->required();

  auto* rules_cmd = app.add_subcommand("rules", "rule program utilities");
  auto* dump_cmd = rules_cmd->add_subcommand("dump", "write the embedded rule program");
  std::string dump_out = "-", dump_format = "dl";
  dump_cmd->add_option("--out", dump_out);
  dump_cmd->add_option("--format", dump_format)
      ->check(CLI::IsMember({"dl", "json"}));
  rules_cmd->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    config::RunConfig cfg = config_path.empty()
                                ? config::RunConfig::defaults()
                                : config::load_config(config_path);
    if (!annotator_flag.empty())
      cfg.annotator = annotator_flag == "remote"
                          ? config::AnnotatorBackend::kRemote
                          : config::AnnotatorBackend::kHeuristic;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (jobs > 0) cfg.parallelism = jobs;

    if (*parse_cmd)
      return cmd_parse(html_path, visual_path, parse_out, cfg, form_id);
    if (*annotate_cmd)
      return cmd_annotate(annotate_form_path, annotate_out, cfg, fallback);
    if (*facts_cmd) return cmd_facts(facts_form_path, facts_out, cfg, fallback);
    if (*check_cmd) return cmd_check(check_form_path, check_out, cfg, fallback);
    if (*corpus_cmd) return cmd_corpus(corpus_dir, cfg, fallback);
    if (*dump_cmd) return cmd_rules_dump(dump_out, dump_format);
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return map_error(e);
  }
}
