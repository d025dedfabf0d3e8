#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "consent_audit/dsl.hpp"
#include "consent_audit/facts.hpp"

namespace fs = std::filesystem;
using namespace consent_audit;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() /
                 ("consent-cli-test-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

RunResult run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  fs::path out = scratch_dir() / ("stdout-" + std::to_string(counter++));
  std::string cmd = env + (env.empty() ? "" : " ") + CLI_BINARY + " " + args +
                    " > " + out.string() + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  return r;
}

std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("check reports violations with exit code 1") {
  auto r = run("check " + fixture("fig1a.form.json"));
  CHECK(r.exit_code == 1);
  auto doc = nlohmann::json::parse(r.output);
  bool has_opt_out = false;
  for (const auto& v : doc["violations"])
    if (v["pattern"] == "OptOutConsent") has_opt_out = true;
  CHECK(has_opt_out);
  CHECK(doc["annotator_backend"] == "heuristic");
  CHECK(doc["config_fingerprint"].get<std::string>().size() == 16);
}

TEST_CASE("check exits 0 on a compliant form") {
  auto r = run("check " + fixture("fig2.form.json"));
  CHECK(r.exit_code == 0);
  auto doc = nlohmann::json::parse(r.output);
  CHECK(doc["violations"].empty());
}

TEST_CASE("check exits 2 on malformed or missing input") {
  fs::path bad = scratch_dir() / "bad.form.json";
  write_file(bad, "{this is not json");
  CHECK(run("check " + bad.string()).exit_code == 2);
  CHECK(run("check " + (scratch_dir() / "nonexistent.json").string())
            .exit_code == 2);
}

TEST_CASE("the timestamp env override pins the report timestamp") {
  auto r = run("check " + fixture("fig7.form.json"),
               "CONSENT_AUDIT_TIMESTAMP=2026-01-02T03:04:05Z");
  CHECK(r.exit_code == 1);
  auto doc = nlohmann::json::parse(r.output);
  CHECK(doc["timestamp"] == "2026-01-02T03:04:05Z");
}

TEST_CASE("parse reconstructs a form from html and visual elements") {
  auto r = run("parse --html " + fixture("fig4.html") + " --visual " +
               fixture("fig4.visual.json") + " --form-id demo");
  REQUIRE(r.exit_code == 0);
  auto form = dsl::parse_form(r.output);
  CHECK(form.form_id == "demo");
  REQUIRE(form.items.size() >= 6);
  CHECK(form.items[0].type == dsl::ItemType::kStaticText);
  CHECK(form.items[2].type == dsl::ItemType::kTextbox);
  CHECK(form.items[2].text() == "First name*");
}

TEST_CASE("annotate emits the derived facts as json") {
  auto r = run("annotate " + fixture("fig7.form.json"));
  REQUIRE(r.exit_code == 0);
  auto doc = nlohmann::json::parse(r.output);
  CHECK(doc["form_id"] == "fig7");
  CHECK(doc["backend"] == "heuristic");
  bool has_polarity = false, has_mapping = false;
  for (const auto& f : doc["facts"]) {
    if (f["predicate"] == "polarity_affirmative") has_polarity = true;
    if (f["predicate"] == "action_mapping") has_mapping = true;
  }
  CHECK(has_polarity);
  CHECK(doc["warnings"].is_array());
}

TEST_CASE("facts exports a directory importable as the same database") {
  fs::path out = scratch_dir() / "facts-out";
  auto r = run("facts " + fixture("fig7.form.json") + " --out " + out.string());
  REQUIRE(r.exit_code == 0);
  auto db = facts::import_facts(out.string());
  CHECK(db.contains("selected", {"u0"}));
  CHECK(db.contains("submit_button", {"u2"}));
  CHECK(db.contains("polarity_affirmative",
                    {"I agree to receive the newsletter."}));
  CHECK_FALSE(db.tuples("item").empty());
}

TEST_CASE("rules dump prints the program and its json form") {
  auto r = run("rules dump");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("p1(") != std::string::npos);
  CHECK(r.output.find("v_preselected(") != std::string::npos);

  auto j = run("rules dump --format json");
  REQUIRE(j.exit_code == 0);
  auto doc = nlohmann::json::parse(j.output);
  CHECK(doc["rules"].size() == 9);
  CHECK(doc["patterns"].size() == 7);
  CHECK(doc["program"].get<std::string>().find("p1(") != std::string::npos);
}

TEST_CASE("corpus audits a tree and tolerates per-form failures") {
  fs::path corpus = scratch_dir() / "corpus";
  fs::path outdir = scratch_dir() / "corpus-out";
  fs::remove_all(corpus);
  fs::remove_all(outdir);
  write_file(corpus / "siteA" / "good.form.json",
             slurp(fixture("fig2.form.json")));
  write_file(corpus / "siteA" / "broken.form.json", "{nope");
  write_file(corpus / "siteB" / "preselected.form.json",
             slurp(fixture("fig7.form.json")));
  write_file(corpus / "categories.csv", "siteA,news\nsiteB,shopping,news\n");

  auto r = run("--output " + outdir.string() + " --jobs 2 corpus " +
                   corpus.string(),
               "CONSENT_AUDIT_TIMESTAMP=2026-01-01T00:00:00Z");
  CHECK(r.exit_code == 0);

  CHECK(fs::exists(outdir / "siteA" / "good.report.json"));
  CHECK(fs::exists(outdir / "siteB" / "preselected.report.json"));
  CHECK_FALSE(fs::exists(outdir / "siteA" / "broken.report.json"));

  auto metrics = nlohmann::json::parse(slurp(outdir / "metrics.json"));
  REQUIRE(metrics["errors"].size() == 1);
  CHECK(metrics["errors"][0].get<std::string>().find("broken.form.json") !=
        std::string::npos);
  CHECK(metrics["per_website"].contains("siteA"));
  CHECK(metrics["per_website"].contains("siteB"));
  CHECK(metrics["per_website"]["siteA"]["rate"].get<double>() ==
        doctest::Approx(0.0));
  CHECK(metrics["per_website"]["siteB"]["rate"].get<double>() > 0.0);
  // siteB is in both categories; news averages the two sites
  CHECK(metrics["per_category"].contains("news"));
  CHECK(metrics["per_category"].contains("shopping"));

  auto report = nlohmann::json::parse(
      slurp(outdir / "siteB" / "preselected.report.json"));
  CHECK(report["timestamp"] == "2026-01-01T00:00:00Z");
  bool preselected = false;
  for (const auto& v : report["violations"])
    if (v["pattern"] == "ConsentPreselected") preselected = true;
  CHECK(preselected);

  auto csv = slurp(outdir / "website_rates.csv");
  CHECK(csv.rfind("website,", 0) == 0);
  CHECK(csv.find("siteA,") != std::string::npos);
  CHECK(csv.find("siteB,") != std::string::npos);
}

TEST_CASE("corpus with no forms or only broken forms exits 2") {
  fs::path empty = scratch_dir() / "empty-corpus";
  fs::create_directories(empty);
  CHECK(run("corpus " + empty.string()).exit_code == 2);

  fs::path broken = scratch_dir() / "broken-corpus";
  write_file(broken / "site" / "a.form.json", "{nope");
  CHECK(run("corpus " + broken.string()).exit_code == 2);

  CHECK(run("corpus " + (scratch_dir() / "missing-dir").string()).exit_code ==
        2);
}

TEST_CASE("config files adjust behavior and the fingerprint") {
  fs::path cfg = scratch_dir() / "strict.json";
  write_file(cfg, R"({"threshold": 0.9, "text_weight": 0.5,
                      "type_weight": 0.5})");
  auto with_cfg = run("--config " + cfg.string() + " check " +
                      fixture("fig7.form.json"));
  auto without = run("check " + fixture("fig7.form.json"));
  REQUIRE(with_cfg.exit_code == 1);
  REQUIRE(without.exit_code == 1);
  auto a = nlohmann::json::parse(with_cfg.output);
  auto b = nlohmann::json::parse(without.output);
  CHECK(a["config_fingerprint"] != b["config_fingerprint"]);

  fs::path bad = scratch_dir() / "bad.json";
  write_file(bad, R"({"no_such_key": 1})");
  CHECK(run("--config " + bad.string() + " check " +
            fixture("fig7.form.json")).exit_code == 2);
}

TEST_CASE("remote annotation without a configured endpoint exits 4") {
  auto r = run("--annotator remote check " + fixture("fig7.form.json"),
               "CONSENT_AUDIT_ANNOTATOR_URL=");
  CHECK(r.exit_code == 4);

  // --fallback downgrades to the heuristic backend instead
  auto f = run("--annotator remote --fallback check " +
                   fixture("fig7.form.json"),
               "CONSENT_AUDIT_ANNOTATOR_URL=");
  CHECK(f.exit_code == 1);
  auto doc = nlohmann::json::parse(f.output);
  CHECK(doc["annotator_backend"] == "heuristic");
}
