#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "consent_audit/annotator.hpp"
#include "consent_audit/errors.hpp"

using namespace consent_audit;
using annotate::AnnotationRequest;
using annotate::KeywordTables;
using annotate::TextEntry;
using annotate::TextField;
using facts::Predicate;
using facts::SemanticFact;

namespace {

bool has_fact(const std::vector<SemanticFact>& facts, Predicate p,
              const facts::Tuple& terms) {
  return std::find(facts.begin(), facts.end(), SemanticFact{p, terms}) !=
         facts.end();
}

dsl::Item request_item(const std::string& uid, dsl::ItemType type,
                       const std::string& text) {
  dsl::Item item;
  item.uid = uid;
  item.type = type;
  item.metadata = dsl::Metadata{};
  item.metadata->request_text = dsl::RequestText{text, std::nullopt};
  return item;
}

}  // namespace

TEST_CASE("heuristic extraction on an opt-out marketing request") {
  const std::string text =
      "We would like to email you about our products and services from "
      "Hearst UK. Tick this box if you would rather not receive these "
      "emails.";
  AnnotationRequest req{"f", {{"u2", TextField::kRequestText, text}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());

  CHECK(has_fact(facts, Predicate::kAction, {text, "tick this box"}));
  // "rather not receive" suppresses the affirmative polarity
  CHECK_FALSE(has_fact(facts, Predicate::kPolarityAffirmative, {text}));
  // purpose clause runs from the pattern to the end of the sentence
  const std::string clause =
      "email you about our products and services from Hearst UK";
  CHECK(has_fact(facts, Predicate::kPurpose, {text, clause}));
  CHECK(has_fact(facts, Predicate::kCategory,
                 {text, "marketing_communication", clause}));
  // the controller comes from the lexicon
  CHECK(has_fact(facts, Predicate::kController, {"Hearst UK"}));
}

TEST_CASE("affirmative requests keep their polarity") {
  const std::string text = "I agree to receive the newsletter.";
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, text}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  CHECK(has_fact(facts, Predicate::kPolarityAffirmative, {text}));
  CHECK(has_fact(facts, Predicate::kPurpose, {text, "newsletter"}));
  CHECK(has_fact(facts, Predicate::kCategory, {text, "newsletter", "newsletter"}));
}

TEST_CASE("withdrawal patterns yield a clause-scoped method") {
  const std::string text =
      "Acme Ltd is the data controller. You can unsubscribe at any time.";
  AnnotationRequest req{"f", {{"u1", TextField::kStaticText, text}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  CHECK(has_fact(facts, Predicate::kWithdraw, {text, "unsubscribe at any time"}));
  // cue-based controller extraction picks the trailing capitalized run
  CHECK(has_fact(facts, Predicate::kController, {"Acme Ltd"}));
  // static text contributes no action or polarity facts
  for (const auto& f : facts) {
    CHECK(f.predicate != Predicate::kAction);
    CHECK(f.predicate != Predicate::kPolarityAffirmative);
  }
}

TEST_CASE("explicit withdrawal metadata falls back to the whole text") {
  AnnotationRequest req{
      "f", {{"u1", TextField::kWithdrawal, "Email privacy@example.com"}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  REQUIRE(facts.size() == 1);
  CHECK(facts[0].predicate == Predicate::kWithdraw);
  CHECK(facts[0].terms ==
        facts::Tuple{"Email privacy@example.com", "Email privacy@example.com"});
}

TEST_CASE("purpose metadata is re-anchored to the item's request text") {
  const std::string request = "I want the goods";
  AnnotationRequest req{"f",
                        {{"u0", TextField::kRequestText, request},
                         {"u0", TextField::kPurpose, "send you our newsletter"}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  CHECK(has_fact(facts, Predicate::kPurpose,
                 {request, "send you our newsletter"}));
  CHECK(has_fact(facts, Predicate::kCategory,
                 {request, "newsletter", "send you our newsletter"}));
}

TEST_CASE("controller metadata passes through verbatim") {
  AnnotationRequest req{"f", {{"u3", TextField::kController, "giosg"}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  REQUIRE(facts.size() == 1);
  CHECK(facts[0] == SemanticFact{Predicate::kController, {"giosg"}});
}

TEST_CASE("unmatched purpose metadata categorizes as other") {
  AnnotationRequest req{"f", {{"u0", TextField::kPurpose, "misc things"}}};
  auto facts = annotate::annotate_heuristic(req, KeywordTables::defaults());
  CHECK(has_fact(facts, Predicate::kCategory,
                 {"misc things", "other", "misc things"}));
}

TEST_CASE("build_request walks the metadata fields in item order") {
  dsl::WebForm form;
  form.form_id = "f";
  auto item = request_item("u0", dsl::ItemType::kCheckbox, "Tick this box");
  item.metadata->purpose = "marketing";
  item.metadata->withdrawal = "unsubscribe";
  item.metadata->controller = "Acme Ltd";
  form.items.push_back(item);
  form.items.push_back(
      request_item("u1", dsl::ItemType::kStaticText, "We value privacy."));

  auto req = annotate::build_request(form);
  REQUIRE(req.texts.size() == 5);
  CHECK(req.texts[0].field == TextField::kRequestText);
  CHECK(req.texts[1].field == TextField::kWithdrawal);
  CHECK(req.texts[2].field == TextField::kPurpose);
  CHECK(req.texts[3].field == TextField::kController);
  CHECK(req.texts[4].field == TextField::kStaticText);
  CHECK(req.texts[4].uid == "u1");
}

TEST_CASE("map_actions covers carrier, button label, and adjacency") {
  dsl::WebForm form;
  form.form_id = "f";

  SUBCASE("selectable carrying the request text") {
    form.items.push_back(
        request_item("u0", dsl::ItemType::kCheckbox, "Tick this box to agree"));
    std::vector<SemanticFact> facts = {
        {Predicate::kAction, {"Tick this box to agree", "tick this box"}}};
    auto mapped = annotate::map_actions(facts, form);
    REQUIRE(mapped.size() == 1);
    CHECK(mapped[0] == SemanticFact{Predicate::kActionMapping,
                                    {"u0", "tick this box"}});
  }

  SUBCASE("button sharing tokens with the action phrase") {
    form.items.push_back(request_item("u0", dsl::ItemType::kStaticText,
                                      "Click subscribe to join the list"));
    auto button = request_item("u1", dsl::ItemType::kButton, "Subscribe");
    form.items.push_back(button);
    std::vector<SemanticFact> facts = {
        {Predicate::kAction,
         {"Click subscribe to join the list", "click subscribe"}}};
    auto mapped = annotate::map_actions(facts, form);
    CHECK(has_fact(mapped, Predicate::kActionMapping, {"u1", "click subscribe"}));
  }

  SUBCASE("fallback to the selectable nearest the carrier") {
    form.items.push_back(request_item("u0", dsl::ItemType::kStaticText,
                                      "Tick this box for updates"));
    dsl::Item box;
    box.uid = "u1";
    box.type = dsl::ItemType::kCheckbox;
    form.items.push_back(box);
    std::vector<SemanticFact> facts = {
        {Predicate::kAction, {"Tick this box for updates", "tick this box"}}};
    auto mapped = annotate::map_actions(facts, form);
    REQUIRE(mapped.size() == 1);
    CHECK(mapped[0] ==
          SemanticFact{Predicate::kActionMapping, {"u1", "tick this box"}});
  }
}

TEST_CASE("validate_facts drops arity and taxonomy violations with warnings") {
  std::vector<SemanticFact> raw = {
      {Predicate::kController, {"Acme"}},
      {Predicate::kController, {"Acme", "extra"}},
      {Predicate::kCategory, {"t", "not_a_category", "p"}},
      {Predicate::kCategory, {"t", "newsletter", "p"}},
  };
  std::vector<std::string> warnings;
  auto kept = annotate::validate_facts(raw, &warnings);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == raw[0]);
  CHECK(kept[1] == raw[3]);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].find("arity") != std::string::npos);
  CHECK(warnings[1].find("not_a_category") != std::string::npos);
}

TEST_CASE("keyword tables round-trip through json and accept overrides") {
  auto defaults = KeywordTables::defaults();
  auto round = KeywordTables::from_json(defaults.to_json());
  CHECK(round.action_phrases == defaults.action_phrases);
  CHECK(round.negative_patterns == defaults.negative_patterns);
  CHECK(round.withdrawal_patterns == defaults.withdrawal_patterns);
  CHECK(round.controller_lexicon == defaults.controller_lexicon);
  CHECK(round.controller_cues == defaults.controller_cues);
  REQUIRE(round.purpose_patterns.size() == defaults.purpose_patterns.size());
  for (std::size_t i = 0; i < round.purpose_patterns.size(); ++i) {
    CHECK(round.purpose_patterns[i].pattern ==
          defaults.purpose_patterns[i].pattern);
    CHECK(round.purpose_patterns[i].category ==
          defaults.purpose_patterns[i].category);
  }

  // partial override keeps the remaining defaults
  auto partial = KeywordTables::from_json(R"({"action_phrases": ["press"]})");
  CHECK(partial.action_phrases == std::vector<std::string>{"press"});
  CHECK(partial.withdrawal_patterns == defaults.withdrawal_patterns);

  CHECK_THROWS_AS(KeywordTables::from_json("{nope"), SyntaxError);
}

// -------------------------------------------------------- remote backend

namespace {

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestServer(httplib::Server::Handler handler) {
    server.Post("/annotate", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  annotate::ServiceConfig config() const {
    annotate::ServiceConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/annotate";
    cfg.api_key = "secret";
    cfg.backoff_initial_ms = 1;
    return cfg;
  }
};

}  // namespace

TEST_CASE("remote annotation parses facts and honors the cache") {
  annotate::reset_remote_cache();
  std::atomic<int> hits{0};
  std::string seen_auth, seen_body;
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(
        R"({"facts":[
             {"predicate":"Purpose","terms":["I agree","newsletter"]},
             {"predicate":"polarity_affirmative","terms":["I agree"]},
             {"predicate":"Mystery","terms":["x"]},
             {"predicate":"Controller","terms":["A","B"]}
           ]})",
        "application/json");
  });

  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "I agree"}}};
  std::vector<std::string> warnings;
  auto facts = annotate::annotate_remote(req, server.config(), &warnings);

  CHECK(hits == 1);
  CHECK(seen_auth == "Bearer secret");
  auto body = nlohmann::json::parse(seen_body);
  CHECK(body["template"] == "semantic_predicates");
  CHECK(body["version"] == "v1");
  CHECK(body["texts"][0]["uid"] == "u0");
  CHECK(body["texts"][0]["field"] == "request_text");

  REQUIRE(facts.size() == 2);
  CHECK(has_fact(facts, Predicate::kPurpose, {"I agree", "newsletter"}));
  CHECK(has_fact(facts, Predicate::kPolarityAffirmative, {"I agree"}));
  // unknown predicate and bad arity produce warnings, not facts
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].find("Mystery") != std::string::npos);
  CHECK(warnings[1].find("arity") != std::string::npos);

  // the same text again is served from the cache
  auto before = annotate::remote_request_count();
  auto again = annotate::annotate_remote(req, server.config());
  CHECK(annotate::remote_request_count() == before);
  CHECK(again == facts);

  // a different text goes back on the wire
  AnnotationRequest other{"f", {{"u1", TextField::kRequestText, "New text"}}};
  annotate::annotate_remote(other, server.config());
  CHECK(annotate::remote_request_count() == before + 1);
}

TEST_CASE("transient server errors are retried then reported") {
  annotate::reset_remote_cache();
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "hello"}}};
  CHECK_THROWS_AS(annotate::annotate_remote(req, server.config()),
                  TransportError);
  CHECK(hits == 3);
  CHECK(annotate::remote_request_count() == 3);
}

TEST_CASE("a retry can succeed after a transient failure") {
  annotate::reset_remote_cache();
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 2) {
      res.status = 500;
      return;
    }
    res.set_content(R"({"facts":[]})", "application/json");
  });
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "hello"}}};
  auto facts = annotate::annotate_remote(req, server.config());
  CHECK(facts.empty());
  CHECK(hits == 2);
}

TEST_CASE("credential rejection raises AuthError without retrying") {
  annotate::reset_remote_cache();
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "hello"}}};
  CHECK_THROWS_AS(annotate::annotate_remote(req, server.config()), AuthError);
  CHECK(hits == 1);
}

TEST_CASE("malformed response bodies raise ProtocolError") {
  annotate::reset_remote_cache();
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json at all", "text/plain");
  });
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "hello"}}};
  CHECK_THROWS_AS(annotate::annotate_remote(req, server.config()),
                  ProtocolError);

  TestServer shaped([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"ok":true})", "application/json");
  });
  AnnotationRequest req2{"f", {{"u0", TextField::kRequestText, "world"}}};
  CHECK_THROWS_AS(annotate::annotate_remote(req2, shaped.config()),
                  ProtocolError);
}

TEST_CASE("an unreachable endpoint raises TransportError") {
  annotate::reset_remote_cache();
  annotate::ServiceConfig cfg;
  cfg.url = "http://127.0.0.1:1/annotate";
  cfg.backoff_initial_ms = 1;
  cfg.timeout_seconds = 1;
  AnnotationRequest req{"f", {{"u0", TextField::kRequestText, "hello"}}};
  CHECK_THROWS_AS(annotate::annotate_remote(req, cfg), TransportError);
}
