#pragma once
// Personal data ontology schema: the entity-type hierarchy (PDET) and the
// person-to-person relation set (PDER) that every other module validates
// against. Schemas are immutable after load and safe to share across
// threads.

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ontopop/errors.hpp"

namespace ontopop {

// A slash path of lowercase label segments, e.g. /person/politician.
// Depth is capped at 3.
class TypePath {
 public:
  static constexpr size_t kMaxDepth = 3;

  TypePath() = default;
  // Throws ParseError on malformed paths.
  static TypePath parse(std::string_view text);

  const std::vector<std::string>& segments() const { return segments_; }
  size_t depth() const { return segments_.size(); }
  bool is_root() const { return segments_.size() == 1; }
  const std::string& root() const { return segments_.front(); }

  TypePath parent() const;  // precondition: !is_root()
  std::string str() const;

  bool operator==(const TypePath& o) const = default;
  auto operator<=>(const TypePath& o) const = default;

 private:
  std::vector<std::string> segments_;
};

// Strict ancestors, nearest first. Root paths give an empty list.
std::vector<TypePath> ancestors(const TypePath& path);

struct RelationDef {
  std::string name;
  bool symmetric = false;
  bool transitive = false;
  bool hierarchical = false;
  TypePath domain_type;  // defaults to /person
  TypePath range_type;
};

class OntologySchema {
 public:
  // Parses the line-oriented schema format:
  //   type <slash-path>
  //   relation <name> [symmetric] [transitive] [hierarchical]
  //            [domain=<path>] [range=<path>]
  //   version <string>
  // '#' starts a comment; blank lines are ignored.
  // Throws ParseError on malformed lines, ValidationError on orphan child
  // paths or duplicate relation names.
  static OntologySchema load(std::string_view schema_text);

  const std::set<TypePath>& types() const { return types_; }
  const std::vector<RelationDef>& relations() const { return relations_; }
  const std::string& version() const { return version_; }

  bool has_type(const TypePath& p) const { return types_.count(p) > 0; }
  const RelationDef* find_relation(std::string_view name) const;
  int relation_index(std::string_view name) const;  // -1 when absent

 private:
  std::set<TypePath> types_;
  std::vector<RelationDef> relations_;  // declaration order
  std::string version_ = "1";
};

// Input labels plus all their ancestors. Throws UnknownLabel if any label
// (or implied ancestor) is not in the schema.
std::set<TypePath> expand_labels(const std::set<TypePath>& labels,
                                 const OntologySchema& schema);

// The default shipped schema: 36 types, 9 person-person relations.
// The concrete label inventory is a replaceable stand-in; swap in your own
// schema file to change it.
const std::string& default_schema_text();

}  // namespace ontopop
