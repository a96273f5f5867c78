#pragma once
// The person-ontology graph: person nodes carrying typed attribute values,
// schema relations between persons, and canonical serialization as
// N-Triples (RDF) and a plain edge list. Exports are deterministically
// sorted; export -> import -> export is byte-identical.
//
// Concurrency: single writer, many readers. Mutations go through one
// writer and bump a revision counter; readers can snapshot via exports.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ontopop/annotators.hpp"
#include "ontopop/schema.hpp"

namespace ontopop {

enum class EdgeProvenance { labeling_function, rel_model, predicted };
std::string_view edge_provenance_name(EdgeProvenance p);
EdgeProvenance edge_provenance_from_name(std::string_view name);

struct AttributeValue {
  TypePath type;
  std::string value;
  MentionProvenance provenance = MentionProvenance::manual;
  std::vector<std::string> mention_refs;  // "doc_id:sent:first-last"
};

struct PersonNode {
  uint32_t id = 0;
  std::string canonical_name;
  std::vector<AttributeValue> attributes;  // deduplicated on (type, value)
};

struct RelationEdge {
  uint32_t head = 0;
  std::string relation;
  uint32_t tail = 0;
  EdgeProvenance provenance = EdgeProvenance::labeling_function;
  double confidence = 1.0;
};

class OntologyGraph {
 public:
  explicit OntologyGraph(std::shared_ptr<const OntologySchema> schema)
      : schema_(std::move(schema)) {}

  const OntologySchema& schema() const { return *schema_; }
  uint64_t revision() const { return revision_; }
  const std::vector<PersonNode>& nodes() const { return nodes_; }
  const std::vector<RelationEdge>& edges() const { return edges_; }

  // Case-folded, whitespace-normalized exact match against canonical
  // names; creates a node when no match exists. Throws NotAPerson unless
  // the mention carries a /person label.
  uint32_t resolve_person(const EntityMention& mention);
  // Same resolution rule applied to a bare surface string.
  uint32_t resolve_person_surface(const std::string& surface);
  std::optional<uint32_t> find_person(const std::string& surface) const;
  const PersonNode& node(uint32_t id) const;  // throws UnknownNode

  // Appends an attribute; duplicates of (type, value) collapse. Throws
  // UnknownNode / InvalidType (type must be a schema type).
  void attach_attribute(uint32_t node_id, const TypePath& type,
                        const std::string& value, MentionProvenance prov,
                        const std::string& mention_ref = "");

  // Inserts or max-merges by confidence. Symmetric relations store the
  // canonical node-id order. Returns true when the edge set changed.
  // Throws UnknownNode / UnknownRelation.
  bool add_relation(const RelationEdge& edge);

  // Canonical N-Triples, LF-terminated, sorted by (node id, predicate,
  // object); edge confidence/provenance ride along as urn:stmt statements.
  std::string export_ntriples() const;

  // TSV: head_id<TAB>relation<TAB>tail_id<TAB>confidence<TAB>provenance.
  std::string export_edgelist() const;

  static OntologyGraph import_ntriples(
      std::string_view bytes, std::shared_ptr<const OntologySchema> schema);

  // Parses the edge-list format back into (head, rel, tail, conf, prov).
  static std::vector<RelationEdge> parse_edgelist(std::string_view bytes);

  // Optional append-only JSON-Lines journal of mutations.
  void set_journal(std::ostream* journal) { journal_ = journal; }
  static OntologyGraph replay_journal(
      std::string_view journal_bytes,
      std::shared_ptr<const OntologySchema> schema);

 private:
  uint32_t new_node(const std::string& canonical, const std::string& norm);
  void bump() { ++revision_; }
  void log_mutation(const std::string& json_line);

  std::shared_ptr<const OntologySchema> schema_;
  std::vector<PersonNode> nodes_;
  std::vector<RelationEdge> edges_;
  std::map<std::string, uint32_t> by_norm_name_;
  std::map<std::tuple<uint32_t, std::string, uint32_t>, size_t> edge_index_;
  uint64_t revision_ = 0;
  std::ostream* journal_ = nullptr;
};

// N-Triples literal escaping per the grammar (\" \\ \n \r \t, control
// characters as \uXXXX).
std::string escape_ntriples_literal(std::string_view s);
std::string unescape_ntriples_literal(std::string_view s);

}  // namespace ontopop
