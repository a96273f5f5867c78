#include "ontopop/graphstore.hpp"

#include <algorithm>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ontopop/util.hpp"

namespace ontopop {

std::string_view edge_provenance_name(EdgeProvenance p) {
  switch (p) {
    case EdgeProvenance::labeling_function:
      return "labeling_function";
    case EdgeProvenance::rel_model:
      return "rel_model";
    case EdgeProvenance::predicted:
      return "predicted";
  }
  return "labeling_function";
}

EdgeProvenance edge_provenance_from_name(std::string_view name) {
  if (name == "labeling_function") return EdgeProvenance::labeling_function;
  if (name == "rel_model") return EdgeProvenance::rel_model;
  if (name == "predicted") return EdgeProvenance::predicted;
  throw ParseError("unknown edge provenance: " + std::string(name));
}

namespace {

std::string norm_name(const std::string& surface) {
  return fold_case(normalize_ws(surface));
}

}  // namespace

uint32_t OntologyGraph::new_node(const std::string& canonical,
                                 const std::string& norm) {
  PersonNode node;
  node.id = static_cast<uint32_t>(nodes_.size());
  node.canonical_name = canonical;
  nodes_.push_back(std::move(node));
  by_norm_name_[norm] = nodes_.back().id;
  bump();
  log_mutation(nlohmann::json{{"op", "node"},
                              {"id", nodes_.back().id},
                              {"name", canonical}}
                   .dump());
  return nodes_.back().id;
}

uint32_t OntologyGraph::resolve_person(const EntityMention& mention) {
  if (!mention.is_person())
    throw NotAPerson("mention '" + mention.surface +
                     "' carries no /person label");
  return resolve_person_surface(mention.surface);
}

uint32_t OntologyGraph::resolve_person_surface(const std::string& surface) {
  std::string norm = norm_name(surface);
  if (norm.empty()) throw ValidationError("empty person surface");
  auto it = by_norm_name_.find(norm);
  if (it != by_norm_name_.end()) return it->second;
  return new_node(normalize_ws(surface), norm);
}

std::optional<uint32_t> OntologyGraph::find_person(
    const std::string& surface) const {
  auto it = by_norm_name_.find(norm_name(surface));
  if (it == by_norm_name_.end()) return std::nullopt;
  return it->second;
}

const PersonNode& OntologyGraph::node(uint32_t id) const {
  if (id >= nodes_.size())
    throw UnknownNode("no node with id " + std::to_string(id));
  return nodes_[id];
}

void OntologyGraph::attach_attribute(uint32_t node_id, const TypePath& type,
                                     const std::string& value,
                                     MentionProvenance prov,
                                     const std::string& mention_ref) {
  if (node_id >= nodes_.size())
    throw UnknownNode("no node with id " + std::to_string(node_id));
  if (!schema_->has_type(type))
    throw InvalidType("attribute type not in schema: " + type.str());

  PersonNode& node = nodes_[node_id];
  for (auto& attr : node.attributes) {
    if (attr.type == type && attr.value == value) {
      // Collapse duplicates; keep any new mention reference.
      if (!mention_ref.empty() &&
          std::find(attr.mention_refs.begin(), attr.mention_refs.end(),
                    mention_ref) == attr.mention_refs.end()) {
        attr.mention_refs.push_back(mention_ref);
        bump();
      }
      return;
    }
  }
  AttributeValue attr;
  attr.type = type;
  attr.value = value;
  attr.provenance = prov;
  if (!mention_ref.empty()) attr.mention_refs.push_back(mention_ref);
  node.attributes.push_back(std::move(attr));
  bump();
  log_mutation(nlohmann::json{{"op", "attr"},
                              {"id", node_id},
                              {"type", type.str()},
                              {"value", value},
                              {"prov", std::string(provenance_name(prov))},
                              {"ref", mention_ref}}
                   .dump());
}

bool OntologyGraph::add_relation(const RelationEdge& edge) {
  if (edge.head >= nodes_.size())
    throw UnknownNode("edge head id " + std::to_string(edge.head));
  if (edge.tail >= nodes_.size())
    throw UnknownNode("edge tail id " + std::to_string(edge.tail));
  const RelationDef* def = schema_->find_relation(edge.relation);
  if (def == nullptr)
    throw UnknownRelation("relation not in schema: " + edge.relation);

  RelationEdge canon = edge;
  if (def->symmetric && canon.head > canon.tail)
    std::swap(canon.head, canon.tail);

  auto key = std::make_tuple(canon.head, canon.relation, canon.tail);
  auto it = edge_index_.find(key);
  if (it != edge_index_.end()) {
    RelationEdge& stored = edges_[it->second];
    if (canon.confidence > stored.confidence) {
      stored.confidence = canon.confidence;
      stored.provenance = canon.provenance;
      bump();
      return true;
    }
    return false;
  }
  edge_index_[key] = edges_.size();
  edges_.push_back(canon);
  bump();
  log_mutation(
      nlohmann::json{{"op", "edge"},
                     {"head", canon.head},
                     {"rel", canon.relation},
                     {"tail", canon.tail},
                     {"prov", std::string(edge_provenance_name(canon.provenance))},
                     {"conf", canon.confidence}}
          .dump());
  return true;
}

void OntologyGraph::log_mutation(const std::string& json_line) {
  if (journal_ != nullptr) *journal_ << json_line << '\n';
}

// ---------------------------------------------------------------------------
// N-Triples
// ---------------------------------------------------------------------------

std::string escape_ntriples_literal(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04X", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

std::string unescape_ntriples_literal(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 1 >= s.size()) throw ParseError("dangling escape in literal");
    char c = s[++i];
    switch (c) {
      case '"':
        out.push_back('"');
        break;
      case '\\':
        out.push_back('\\');
        break;
      case 'n':
        out.push_back('\n');
        break;
      case 'r':
        out.push_back('\r');
        break;
      case 't':
        out.push_back('\t');
        break;
      case 'u':
      case 'U': {
        size_t len = c == 'u' ? 4 : 8;
        if (i + len >= s.size())
          throw ParseError("truncated \\u escape in literal");
        char32_t cp = 0;
        for (size_t k = 1; k <= len; ++k) {
          char h = s[i + k];
          cp <<= 4;
          if (h >= '0' && h <= '9')
            cp |= static_cast<char32_t>(h - '0');
          else if (h >= 'a' && h <= 'f')
            cp |= static_cast<char32_t>(h - 'a' + 10);
          else if (h >= 'A' && h <= 'F')
            cp |= static_cast<char32_t>(h - 'A' + 10);
          else
            throw ParseError("bad hex digit in \\u escape");
        }
        i += len;
        out += utf8_encode(cp);
        break;
      }
      default:
        throw ParseError(std::string("unknown escape \\") + c);
    }
  }
  return out;
}

namespace {

struct TripleLine {
  int kind;  // 0 = person subject, 1 = stmt subject
  uint64_t a = 0;
  std::string rel;  // stmt relation
  uint64_t b = 0;   // stmt tail
  std::string predicate;
  std::string object;  // rendered form
  std::string subject_render;

  bool operator<(const TripleLine& o) const {
    return std::tie(kind, a, rel, b, predicate, object) <
           std::tie(o.kind, o.a, o.rel, o.b, o.predicate, o.object);
  }
};

std::string person_uri(uint32_t id) {
  return "urn:person:" + std::to_string(id);
}

}  // namespace

std::string OntologyGraph::export_ntriples() const {
  std::vector<TripleLine> lines;
  for (const auto& node : nodes_) {
    TripleLine name_line;
    name_line.kind = 0;
    name_line.a = node.id;
    name_line.subject_render = person_uri(node.id);
    name_line.predicate = "urn:pde:canonical_name";
    name_line.object =
        "\"" + escape_ntriples_literal(node.canonical_name) + "\"";
    lines.push_back(std::move(name_line));
    for (const auto& attr : node.attributes) {
      TripleLine l;
      l.kind = 0;
      l.a = node.id;
      l.subject_render = person_uri(node.id);
      l.predicate = "urn:pde:" + attr.type.str().substr(1);
      l.object = "\"" + escape_ntriples_literal(attr.value) + "\"";
      lines.push_back(std::move(l));
    }
  }
  for (const auto& edge : edges_) {
    TripleLine l;
    l.kind = 0;
    l.a = edge.head;
    l.subject_render = person_uri(edge.head);
    l.predicate = "urn:pder:" + edge.relation;
    l.object = "<" + person_uri(edge.tail) + ">";
    lines.push_back(std::move(l));

    std::string stmt = "urn:stmt:" + std::to_string(edge.head) + ":" +
                       edge.relation + ":" + std::to_string(edge.tail);
    TripleLine conf;
    conf.kind = 1;
    conf.a = edge.head;
    conf.rel = edge.relation;
    conf.b = edge.tail;
    conf.subject_render = stmt;
    conf.predicate = "urn:pde:confidence";
    conf.object = "\"" + format_double(edge.confidence) + "\"";
    TripleLine prov = conf;
    prov.predicate = "urn:pde:provenance";
    prov.object =
        "\"" + std::string(edge_provenance_name(edge.provenance)) + "\"";
    lines.push_back(std::move(conf));
    lines.push_back(std::move(prov));
  }
  std::sort(lines.begin(), lines.end());

  std::string out;
  for (const auto& l : lines) {
    out += "<" + l.subject_render + "> <" + l.predicate + "> " + l.object +
           " .\n";
  }
  return out;
}

std::string OntologyGraph::export_edgelist() const {
  std::vector<const RelationEdge*> sorted;
  for (const auto& e : edges_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const RelationEdge* a, const RelationEdge* b) {
              return std::tie(a->head, a->relation, a->tail) <
                     std::tie(b->head, b->relation, b->tail);
            });
  std::string out;
  for (const auto* e : sorted) {
    out += std::to_string(e->head);
    out.push_back('\t');
    out += e->relation;
    out.push_back('\t');
    out += std::to_string(e->tail);
    out.push_back('\t');
    out += format_double(e->confidence);
    out.push_back('\t');
    out += edge_provenance_name(e->provenance);
    out.push_back('\n');
  }
  return out;
}

std::vector<RelationEdge> OntologyGraph::parse_edgelist(
    std::string_view bytes) {
  std::vector<RelationEdge> out;
  int lineno = 0;
  for (const auto& line : split_lines(bytes)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 5)
      throw ParseError("edge list line " + std::to_string(lineno) +
                       ": expected 5 tab-separated fields");
    RelationEdge e;
    e.head = static_cast<uint32_t>(std::stoul(fields[0]));
    e.relation = fields[1];
    e.tail = static_cast<uint32_t>(std::stoul(fields[2]));
    e.confidence = std::stod(fields[3]);
    e.provenance = edge_provenance_from_name(fields[4]);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

struct ParsedStatement {
  std::string subject;
  std::string predicate;
  std::string object;  // URI without brackets, or literal unescaped
  bool object_is_uri = false;
};

ParsedStatement parse_ntriples_line(const std::string& line, int lineno) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("N-Triples line " + std::to_string(lineno) + ": " +
                      why);
  };
  size_t i = 0;
  auto skip_ws = [&]() {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  };
  auto read_uri = [&]() {
    if (i >= line.size() || line[i] != '<') throw fail("expected '<'");
    size_t close = line.find('>', i);
    if (close == std::string::npos) throw fail("unterminated URI");
    std::string uri = line.substr(i + 1, close - i - 1);
    i = close + 1;
    return uri;
  };

  ParsedStatement st;
  skip_ws();
  st.subject = read_uri();
  skip_ws();
  st.predicate = read_uri();
  skip_ws();
  if (i < line.size() && line[i] == '<') {
    st.object = read_uri();
    st.object_is_uri = true;
  } else if (i < line.size() && line[i] == '"') {
    // Find the closing unescaped quote.
    size_t j = i + 1;
    while (j < line.size()) {
      if (line[j] == '\\') {
        j += 2;
        continue;
      }
      if (line[j] == '"') break;
      ++j;
    }
    if (j >= line.size()) throw fail("unterminated literal");
    st.object = unescape_ntriples_literal(
        std::string_view(line).substr(i + 1, j - i - 1));
    i = j + 1;
  } else {
    throw fail("expected URI or literal object");
  }
  skip_ws();
  if (i >= line.size() || line[i] != '.')
    throw fail("statement must end with ' .'");
  ++i;
  skip_ws();
  if (i != line.size()) throw fail("trailing garbage after '.'");
  return st;
}

uint32_t parse_person_uri(const std::string& uri, int lineno) {
  if (!uri.starts_with("urn:person:"))
    throw UnknownVocabulary("line " + std::to_string(lineno) +
                            ": foreign URI <" + uri + ">");
  try {
    return static_cast<uint32_t>(std::stoul(uri.substr(11)));
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(lineno) +
                     ": bad person id in <" + uri + ">");
  }
}

}  // namespace

OntologyGraph OntologyGraph::import_ntriples(
    std::string_view bytes, std::shared_ptr<const OntologySchema> schema) {
  struct PendingEdge {
    uint32_t head, tail;
    std::string relation;
    double confidence = 1.0;
    EdgeProvenance provenance = EdgeProvenance::labeling_function;
  };
  std::map<uint32_t, std::string> names;
  std::map<uint32_t, std::vector<std::pair<TypePath, std::string>>> attrs;
  std::map<std::tuple<uint32_t, std::string, uint32_t>, PendingEdge> pending;

  auto pending_edge = [&](uint32_t h, const std::string& rel,
                          uint32_t t) -> PendingEdge& {
    auto key = std::make_tuple(h, rel, t);
    auto it = pending.find(key);
    if (it == pending.end()) {
      PendingEdge e;
      e.head = h;
      e.tail = t;
      e.relation = rel;
      it = pending.emplace(key, std::move(e)).first;
    }
    return it->second;
  };

  int lineno = 0;
  for (const auto& line : split_lines(bytes)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    ParsedStatement st = parse_ntriples_line(line, lineno);

    if (st.subject.starts_with("urn:stmt:")) {
      // urn:stmt:<head>:<rel>:<tail> meta statements
      auto fields = split_on(st.subject.substr(9), ':');
      if (fields.size() != 3)
        throw ParseError("line " + std::to_string(lineno) +
                         ": malformed stmt URI");
      uint32_t h = static_cast<uint32_t>(std::stoul(fields[0]));
      uint32_t t = static_cast<uint32_t>(std::stoul(fields[2]));
      PendingEdge& e = pending_edge(h, fields[1], t);
      if (st.predicate == "urn:pde:confidence")
        e.confidence = std::stod(st.object);
      else if (st.predicate == "urn:pde:provenance")
        e.provenance = edge_provenance_from_name(st.object);
      else
        throw UnknownVocabulary("line " + std::to_string(lineno) +
                                ": foreign stmt predicate <" + st.predicate +
                                ">");
      continue;
    }

    uint32_t subject_id = parse_person_uri(st.subject, lineno);
    if (st.predicate == "urn:pde:canonical_name") {
      names[subject_id] = st.object;
    } else if (st.predicate.starts_with("urn:pder:")) {
      if (!st.object_is_uri)
        throw ParseError("line " + std::to_string(lineno) +
                         ": relation object must be a person URI");
      uint32_t tail = parse_person_uri(st.object, lineno);
      pending_edge(subject_id, st.predicate.substr(9), tail);
    } else if (st.predicate.starts_with("urn:pde:")) {
      TypePath type = TypePath::parse("/" + st.predicate.substr(8));
      attrs[subject_id].emplace_back(std::move(type), st.object);
    } else {
      throw UnknownVocabulary("line " + std::to_string(lineno) +
                              ": foreign predicate <" + st.predicate + ">");
    }
  }

  OntologyGraph graph(std::move(schema));
  // Node ids must be dense and named.
  uint32_t expected = 0;
  for (const auto& [id, name] : names) {
    if (id != expected)
      throw ValidationError("node ids not dense: missing id " +
                            std::to_string(expected));
    ++expected;
    std::string norm = norm_name(name);
    if (graph.by_norm_name_.count(norm))
      throw ValidationError("duplicate canonical name: " + name);
    graph.new_node(name, norm);
  }
  for (const auto& [id, list] : attrs) {
    if (id >= graph.nodes_.size())
      throw UnknownNode("attribute for undeclared node " + std::to_string(id));
    for (const auto& [type, value] : list)
      graph.attach_attribute(id, type, value, MentionProvenance::manual);
  }
  for (const auto& [key, e] : pending) {
    RelationEdge edge;
    edge.head = e.head;
    edge.tail = e.tail;
    edge.relation = e.relation;
    edge.confidence = e.confidence;
    edge.provenance = e.provenance;
    graph.add_relation(edge);
  }
  return graph;
}

OntologyGraph OntologyGraph::replay_journal(
    std::string_view journal_bytes,
    std::shared_ptr<const OntologySchema> schema) {
  OntologyGraph graph(std::move(schema));
  int lineno = 0;
  for (const auto& line : split_lines(journal_bytes)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("journal line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    std::string op = obj.at("op").get<std::string>();
    if (op == "node") {
      std::string name = obj.at("name").get<std::string>();
      uint32_t id = graph.resolve_person_surface(name);
      if (id != obj.at("id").get<uint32_t>())
        throw ValidationError("journal line " + std::to_string(lineno) +
                              ": node id mismatch on replay");
    } else if (op == "attr") {
      graph.attach_attribute(
          obj.at("id").get<uint32_t>(),
          TypePath::parse(obj.at("type").get<std::string>()),
          obj.at("value").get<std::string>(),
          provenance_from_name(obj.at("prov").get<std::string>()),
          obj.value("ref", std::string()));
    } else if (op == "edge") {
      RelationEdge e;
      e.head = obj.at("head").get<uint32_t>();
      e.tail = obj.at("tail").get<uint32_t>();
      e.relation = obj.at("rel").get<std::string>();
      e.provenance =
          edge_provenance_from_name(obj.at("prov").get<std::string>());
      e.confidence = obj.at("conf").get<double>();
      graph.add_relation(e);
    } else {
      throw ParseError("journal line " + std::to_string(lineno) +
                       ": unknown op '" + op + "'");
    }
  }
  return graph;
}

}  // namespace ontopop
