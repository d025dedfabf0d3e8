#include "consent_audit/facts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "consent_audit/errors.hpp"
#include "consent_audit/text.hpp"

namespace fs = std::filesystem;

namespace consent_audit::facts {

void FactDb::declare(const std::string& relation, std::size_t arity) {
  auto it = schema_.find(relation);
  if (it != schema_.end()) {
    if (it->second != arity)
      throw SchemaError("relation " + relation + " redeclared with arity " +
                        std::to_string(arity) + ", was " +
                        std::to_string(it->second));
    return;
  }
  schema_[relation] = arity;
  relations_[relation];  // materialize the (possibly empty) tuple set
}

bool FactDb::declared(const std::string& relation) const {
  return schema_.count(relation) != 0;
}

std::size_t FactDb::arity(const std::string& relation) const {
  auto it = schema_.find(relation);
  if (it == schema_.end())
    throw SchemaError("unknown relation " + relation);
  return it->second;
}

void FactDb::insert(const std::string& relation, Tuple tuple) {
  auto it = schema_.find(relation);
  if (it == schema_.end()) {
    declare(relation, tuple.size());
  } else if (it->second != tuple.size()) {
    throw SchemaError("arity mismatch for " + relation + ": got " +
                      std::to_string(tuple.size()) + ", declared " +
                      std::to_string(it->second));
  }
  relations_[relation].insert(std::move(tuple));
}

const std::set<Tuple>& FactDb::tuples(const std::string& relation) const {
  static const std::set<Tuple> kEmpty;
  auto it = relations_.find(relation);
  return it == relations_.end() ? kEmpty : it->second;
}

bool FactDb::contains(const std::string& relation, const Tuple& tuple) const {
  auto it = relations_.find(relation);
  return it != relations_.end() && it->second.count(tuple) != 0;
}

const char* relation_name(Predicate p) {
  switch (p) {
    case Predicate::kAction: return "action";
    case Predicate::kPurpose: return "purpose";
    case Predicate::kActionMapping: return "action_mapping";
    case Predicate::kCategory: return "category";
    case Predicate::kController: return "controller";
    case Predicate::kWithdraw: return "withdraw";
    case Predicate::kPolarityAffirmative: return "polarity_affirmative";
  }
  return "?";
}

std::size_t predicate_arity(Predicate p) {
  switch (p) {
    case Predicate::kAction: return 2;
    case Predicate::kPurpose: return 2;
    case Predicate::kActionMapping: return 2;
    case Predicate::kCategory: return 3;
    case Predicate::kController: return 1;
    case Predicate::kWithdraw: return 2;
    case Predicate::kPolarityAffirmative: return 1;
  }
  return 0;
}

namespace {

bool is_submit_button(const dsl::Item& item, const BaseFactConfig& cfg) {
  if (item.type != dsl::ItemType::kButton) return false;
  std::string label = text::normalize(item.text());
  if (label.empty()) return true;  // unlabeled button: assume submission
  for (const auto& kw : cfg.submit_keywords)
    if (text::contains_phrase(label, text::normalize(kw))) return true;
  return false;
}

}  // namespace

FactDb generate_base_facts(const dsl::WebForm& form, const BaseFactConfig& cfg) {
  FactDb db;
  db.declare("item", 3);
  db.declare("selected", 1);
  db.declare("element_sent", 2);
  db.declare("submit_button", 1);
  db.declare("is_select_type", 1);

  for (const auto& t : cfg.select_types) db.insert("is_select_type", {t});

  for (const auto& item : form.items) {
    db.insert("item",
              {item.uid, dsl::to_string(item.type), item.text()});
    if (item.checked && dsl::is_select_type(item.type))
      db.insert("selected", {item.uid});
    if (item.metadata && item.metadata->request_text)
      db.insert("element_sent", {item.uid, item.metadata->request_text->text});
    if (is_submit_button(item, cfg)) db.insert("submit_button", {item.uid});
  }
  return db;
}

FactDb merge_semantic_facts(FactDb db, const std::vector<SemanticFact>& facts) {
  for (const auto& p :
       {Predicate::kAction, Predicate::kPurpose, Predicate::kActionMapping,
        Predicate::kCategory, Predicate::kController, Predicate::kWithdraw,
        Predicate::kPolarityAffirmative})
    db.declare(relation_name(p), predicate_arity(p));

  for (const auto& f : facts) {
    if (f.terms.size() != predicate_arity(f.predicate))
      throw SchemaError(std::string("semantic fact ") +
                        relation_name(f.predicate) + " has arity " +
                        std::to_string(f.terms.size()) + ", expected " +
                        std::to_string(predicate_arity(f.predicate)));
    db.insert(relation_name(f.predicate), f.terms);
  }
  return db;
}

namespace {

std::string escape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      if (s[i] == 't') out.push_back('\t');
      else if (s[i] == 'n') out.push_back('\n');
      else out.push_back(s[i]);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

void export_facts(const FactDb& db, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  // schema manifest so empty and nullary relations round-trip
  {
    std::ofstream manifest(fs::path(dir) / "schema.tsv");
    if (!manifest) throw IoError("cannot write schema.tsv in " + dir);
    for (const auto& [rel, arity] : db.schema())
      manifest << rel << '\t' << arity << '\n';
  }

  for (const auto& [rel, tuples] : db.relations()) {
    std::ofstream out(fs::path(dir) / (rel + ".facts"));
    if (!out) throw IoError("cannot write " + rel + ".facts in " + dir);
    for (const auto& tuple : tuples) {
      for (std::size_t i = 0; i < tuple.size(); ++i) {
        if (i) out << '\t';
        out << escape_field(tuple[i]);
      }
      out << '\n';
    }
  }
}

FactDb import_facts(const std::string& dir) {
  FactDb db;
  fs::path base(dir);
  if (!fs::is_directory(base)) throw IoError(dir + " is not a directory");

  if (std::ifstream manifest(base / "schema.tsv"); manifest) {
    std::string line;
    while (std::getline(manifest, line)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      db.declare(line.substr(0, tab),
                 static_cast<std::size_t>(std::stoul(line.substr(tab + 1))));
    }
  }

  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.path().extension() != ".facts") continue;
    const std::string rel = entry.path().stem().string();
    std::ifstream in(entry.path());
    if (!in) throw IoError("cannot read " + entry.path().string());
    std::string line;
    while (std::getline(in, line)) {
      Tuple tuple;
      if (db.declared(rel) && db.arity(rel) == 0) {
        db.insert(rel, {});
        continue;
      }
      std::string field;
      std::size_t start = 0;
      for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
          tuple.push_back(unescape_field(line.substr(start, i - start)));
          start = i + 1;
        }
      }
      db.insert(rel, std::move(tuple));
    }
  }
  return db;
}

}  // namespace consent_audit::facts
