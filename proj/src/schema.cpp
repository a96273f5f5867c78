#include "ontopop/schema.hpp"

#include <algorithm>

#include "ontopop/util.hpp"

namespace ontopop {

static bool valid_segment(std::string_view seg) {
  if (seg.empty()) return false;
  char c0 = seg[0];
  if (!((c0 >= 'a' && c0 <= 'z') || c0 == '_')) return false;
  for (char c : seg) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

TypePath TypePath::parse(std::string_view text) {
  if (text.empty() || text[0] != '/')
    throw ParseError("type path must start with '/': '" + std::string(text) +
                     "'");
  TypePath out;
  size_t i = 1;
  while (i <= text.size()) {
    size_t j = text.find('/', i);
    if (j == std::string_view::npos) j = text.size();
    std::string_view seg = text.substr(i, j - i);
    if (!valid_segment(seg))
      throw ParseError("bad path segment '" + std::string(seg) + "' in '" +
                       std::string(text) + "'");
    out.segments_.emplace_back(seg);
    i = j + 1;
    if (j == text.size()) break;
  }
  if (out.segments_.empty() || out.segments_.size() > kMaxDepth)
    throw ParseError("type path depth out of range: '" + std::string(text) +
                     "'");
  return out;
}

TypePath TypePath::parent() const {
  TypePath out;
  out.segments_.assign(segments_.begin(), segments_.end() - 1);
  return out;
}

std::string TypePath::str() const {
  std::string out;
  for (const auto& seg : segments_) {
    out.push_back('/');
    out += seg;
  }
  return out;
}

std::vector<TypePath> ancestors(const TypePath& path) {
  std::vector<TypePath> out;
  TypePath cur = path;
  while (!cur.is_root()) {
    cur = cur.parent();
    out.push_back(cur);
  }
  return out;
}

const RelationDef* OntologySchema::find_relation(std::string_view name) const {
  for (const auto& r : relations_)
    if (r.name == name) return &r;
  return nullptr;
}

int OntologySchema::relation_index(std::string_view name) const {
  for (size_t i = 0; i < relations_.size(); ++i)
    if (relations_[i].name == name) return static_cast<int>(i);
  return -1;
}

OntologySchema OntologySchema::load(std::string_view schema_text) {
  OntologySchema schema;
  const TypePath person = TypePath::parse("/person");

  int lineno = 0;
  for (const auto& raw : split_lines(schema_text)) {
    ++lineno;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    auto fields = split_ws(line);
    if (fields.empty()) continue;

    const std::string& kw = fields[0];
    if (kw == "type") {
      if (fields.size() != 2)
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected 'type <path>'");
      schema.types_.insert(TypePath::parse(fields[1]));
    } else if (kw == "relation") {
      if (fields.size() < 2)
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected 'relation <name> ...'");
      RelationDef rel;
      rel.name = fields[1];
      if (!valid_segment(rel.name))
        throw ParseError("line " + std::to_string(lineno) +
                         ": bad relation name '" + rel.name + "'");
      rel.domain_type = person;
      rel.range_type = person;
      for (size_t i = 2; i < fields.size(); ++i) {
        const std::string& f = fields[i];
        if (f == "symmetric")
          rel.symmetric = true;
        else if (f == "transitive")
          rel.transitive = true;
        else if (f == "hierarchical")
          rel.hierarchical = true;
        else if (f.starts_with("domain="))
          rel.domain_type = TypePath::parse(f.substr(7));
        else if (f.starts_with("range="))
          rel.range_type = TypePath::parse(f.substr(6));
        else
          throw ParseError("line " + std::to_string(lineno) +
                           ": unknown relation flag '" + f + "'");
      }
      if (schema.find_relation(rel.name) != nullptr)
        throw ValidationError("duplicate relation '" + rel.name + "'");
      schema.relations_.push_back(std::move(rel));
    } else if (kw == "version") {
      if (fields.size() != 2)
        throw ParseError("line " + std::to_string(lineno) +
                         ": expected 'version <string>'");
      schema.version_ = fields[1];
    } else {
      throw ParseError("line " + std::to_string(lineno) +
                       ": unknown directive '" + kw + "'");
    }
  }

  // Parent closure: every non-root path needs its parent declared.
  for (const auto& t : schema.types_) {
    if (!t.is_root() && schema.types_.count(t.parent()) == 0)
      throw ValidationError("orphan type path '" + t.str() +
                            "': parent '" + t.parent().str() +
                            "' not declared");
  }
  // Relation endpoints must exist when any types are declared.
  for (const auto& r : schema.relations_) {
    if (!schema.has_type(r.domain_type))
      throw ValidationError("relation '" + r.name + "' domain '" +
                            r.domain_type.str() + "' not a declared type");
    if (!schema.has_type(r.range_type))
      throw ValidationError("relation '" + r.name + "' range '" +
                            r.range_type.str() + "' not a declared type");
  }
  return schema;
}

std::set<TypePath> expand_labels(const std::set<TypePath>& labels,
                                 const OntologySchema& schema) {
  std::set<TypePath> out;
  for (const auto& l : labels) {
    if (!schema.has_type(l))
      throw UnknownLabel("label not in schema: " + l.str());
    out.insert(l);
    for (const auto& a : ancestors(l)) out.insert(a);
  }
  return out;
}

const std::string& default_schema_text() {
  static const std::string text = R"(# Default personal-data ontology schema: 36 entity types, 9 relations.
# The label inventory is a replaceable stand-in; edit or swap this file to
# change it. Paths are lowercase slash paths, depth <= 3.
version 1

type /person
type /person/name
type /person/politician
type /person/profession
type /person/nationality
type /person/religion
type /person/gender
type /person/age
type /person/title

type /org
type /org/education
type /org/employer
type /org/company
type /org/political_party
type /org/government

type /location
type /location/birthplace
type /location/residence
type /location/city
type /location/state
type /location/country

type /contact
type /contact/email
type /contact/phone
type /contact/address
type /contact/website
type /contact/zip

type /id_number
type /id_number/passport
type /id_number/ssn
type /id_number/tax_id
type /id_number/license

type /datetime
type /datetime/date_of_birth
type /datetime/date_of_death
type /datetime/year

relation spouse_of symmetric
relation parent_of hierarchical
relation child_of hierarchical
relation sibling_of symmetric
relation relative_of
relation colleague_of symmetric
relation classmate_of symmetric
relation successor_of transitive
relation opponent_of
)";
  return text;
}

}  // namespace ontopop
