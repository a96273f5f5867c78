#include "ontopop/annotators.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "ontopop/errors.hpp"
#include "ontopop/util.hpp"

namespace ontopop {

std::string_view provenance_name(MentionProvenance p) {
  switch (p) {
    case MentionProvenance::gazetteer:
      return "gazetteer";
    case MentionProvenance::pattern:
      return "pattern";
    case MentionProvenance::classifier:
      return "classifier";
    case MentionProvenance::manual:
      return "manual";
  }
  return "manual";
}

MentionProvenance provenance_from_name(std::string_view name) {
  if (name == "gazetteer") return MentionProvenance::gazetteer;
  if (name == "pattern") return MentionProvenance::pattern;
  if (name == "classifier") return MentionProvenance::classifier;
  if (name == "manual") return MentionProvenance::manual;
  throw ParseError("unknown mention provenance: " + std::string(name));
}

bool EntityMention::is_person() const {
  if (coarse_label && coarse_label->root() == "person") return true;
  for (const auto& l : fine_labels)
    if (l.root() == "person") return true;
  return false;
}

void Gazetteer::add_entry(const std::string& surface) {
  auto tokens = tokenize(surface, 0);
  if (tokens.empty())
    throw ValidationError("gazetteer entry tokenizes to nothing: '" +
                          surface + "'");
  std::vector<std::string> seq;
  seq.reserve(tokens.size());
  for (const auto& t : tokens)
    seq.push_back(case_sensitive_ ? t.text : fold_case(t.text));
  max_len_ = std::max(max_len_, seq.size());
  entries_.insert(std::move(seq));
}

size_t Gazetteer::longest_match(const std::vector<Token>& tokens,
                                size_t pos) const {
  size_t limit = std::min(max_len_, tokens.size() - pos);
  std::vector<std::string> probe;
  probe.reserve(limit);
  for (size_t k = 0; k < limit; ++k) {
    const std::string& text = tokens[pos + k].text;
    probe.push_back(case_sensitive_ ? text : fold_case(text));
  }
  for (size_t len = limit; len >= 1; --len) {
    probe.resize(len);
    if (entries_.count(probe)) return len;
  }
  return 0;
}

std::vector<EntityMention> gazetteer_annotate(
    const Sentence& sentence, const std::vector<Gazetteer>& gazetteers) {
  std::vector<EntityMention> out;
  const auto& tokens = sentence.tokens;
  size_t i = 0;
  while (i < tokens.size()) {
    size_t best_len = 0;
    const Gazetteer* best = nullptr;
    for (const auto& g : gazetteers) {
      size_t len = g.longest_match(tokens, i);
      if (len > best_len ||
          (len == best_len && len > 0 &&
           g.type_label() < best->type_label())) {
        best_len = len;
        best = &g;
      }
    }
    if (best_len == 0) {
      ++i;
      continue;
    }
    EntityMention m;
    m.doc_id = sentence.doc_id;
    m.sent_index = sentence.sent_index;
    m.first_tok = i;
    m.last_tok = i + best_len - 1;
    size_t a = tokens[m.first_tok].begin - sentence.begin;
    size_t b = tokens[m.last_tok].end - sentence.begin;
    std::u32string stext = utf8_decode(sentence.text);
    m.surface = utf8_encode(std::u32string_view(stext).substr(a, b - a));
    m.coarse_label = best->type_label();
    m.provenance = MentionProvenance::gazetteer;
    out.push_back(std::move(m));
    i += best_len;
  }
  return out;
}

std::vector<Gazetteer> load_gazetteers(std::string_view text) {
  std::vector<Gazetteer> out;
  std::optional<TypePath> current_type;
  bool case_sensitive = false;
  std::vector<std::string> pending;

  auto flush = [&]() {
    if (!current_type) return;
    Gazetteer g(*current_type, case_sensitive);
    for (const auto& entry : pending) g.add_entry(entry);
    if (g.size() == 0)
      throw ValidationError("gazetteer for " + current_type->str() +
                            " has no entries");
    out.push_back(std::move(g));
    pending.clear();
    case_sensitive = false;
  };

  for (const auto& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.starts_with("@type")) {
      flush();
      auto fields = split_ws(line);
      if (fields.size() != 2) throw ParseError("expected '@type <path>'");
      current_type = TypePath::parse(fields[1]);
    } else if (line == "@case_sensitive") {
      case_sensitive = true;
    } else if (line[0] == '@') {
      throw ParseError("unknown gazetteer directive: " + line);
    } else {
      if (!current_type)
        throw ParseError("gazetteer entry before any @type header");
      pending.push_back(line);
    }
  }
  flush();
  return out;
}

std::vector<PatternRule> load_rules(std::string_view text) {
  std::vector<PatternRule> out;
  int lineno = 0;
  for (const auto& raw : split_lines(text)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_ws(line);
    if (fields.size() < 4 || fields[0] != "rule")
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 'rule <path> <priority> /<regex>/'");
    PatternRule rule;
    rule.type_label = TypePath::parse(fields[1]);
    try {
      rule.priority = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad priority '" +
                       fields[2] + "'");
    }
    size_t first = line.find('/', line.find(fields[2]) + fields[2].size());
    size_t last = line.rfind('/');
    if (first == std::string::npos || last <= first)
      throw ParseError("line " + std::to_string(lineno) +
                       ": regex must be wrapped in slashes");
    rule.pattern = line.substr(first + 1, last - first - 1);
    try {
      rule.compiled = std::regex(rule.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw RuleCompileError("line " + std::to_string(lineno) + ": regex '" +
                             rule.pattern + "' does not compile: " + e.what());
    }
    out.push_back(std::move(rule));
  }
  return out;
}

const std::string& default_rules_text() {
  // Coarse high-precision stand-ins for an enterprise rule engine. Priority
  // resolves overlaps: zip beats year beats bare number.
  static const std::string text = R"(# Coarse pattern rule pack.
rule /contact/email 10 /[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}/
rule /contact/website 9 /(https?:\/\/|www\.)[A-Za-z0-9.\/_%+#?&=-]+/
rule /datetime 9 /[0-9]{4}-[0-9]{2}-[0-9]{2}/
rule /datetime 9 /[0-9]{1,2} (January|February|March|April|May|June|July|August|September|October|November|December) [0-9]{4}/
rule /contact/phone 8 /(\+[0-9]{1,3}[ -])?([0-9]{3}[ -])?[0-9]{3}[ -][0-9]{4}/
rule /contact/zip 5 /\b[0-9]{5}(-[0-9]{4})?\b/
rule /datetime/year 2 /\b(1[0-9]{3}|20[0-9]{2})\b/
rule /id_number 1 /\b[0-9]+\b/
)";
  return text;
}

namespace {

struct SnappedMatch {
  size_t first_tok, last_tok;
  const PatternRule* rule;
};

}  // namespace

std::vector<EntityMention> pattern_annotate(
    const Sentence& sentence, const std::vector<PatternRule>& rules) {
  std::vector<EntityMention> out;
  if (rules.empty() || sentence.tokens.empty()) return out;

  // Map byte offsets (what std::regex reports) to scalar offsets.
  std::vector<size_t> byte_to_scalar(sentence.text.size() + 1, 0);
  {
    size_t scalar = 0;
    for (size_t b = 0; b < sentence.text.size();) {
      byte_to_scalar[b] = scalar;
      unsigned char c = sentence.text[b];
      size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2
                             : (c & 0xF0) == 0xE0   ? 3
                             : (c & 0xF8) == 0xF0   ? 4
                                                    : 1;
      for (size_t k = 1; k < len && b + k < sentence.text.size(); ++k)
        byte_to_scalar[b + k] = scalar;
      b += len;
      ++scalar;
    }
    byte_to_scalar[sentence.text.size()] = scalar;
  }

  std::vector<SnappedMatch> candidates;
  for (const auto& rule : rules) {
    auto begin = std::sregex_iterator(sentence.text.begin(),
                                      sentence.text.end(), rule.compiled);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      if (it->length(0) == 0) continue;
      size_t s1 = sentence.begin + byte_to_scalar[it->position(0)];
      size_t s2 =
          sentence.begin + byte_to_scalar[it->position(0) + it->length(0)];
      // Snap outward to whole tokens.
      size_t first = sentence.tokens.size(), last = 0;
      bool any = false;
      for (size_t t = 0; t < sentence.tokens.size(); ++t) {
        const Token& tok = sentence.tokens[t];
        if (tok.end > s1 && tok.begin < s2) {
          first = std::min(first, t);
          last = std::max(last, t);
          any = true;
        }
      }
      if (any) candidates.push_back({first, last, &rule});
    }
  }

  // priority > leftmost > longest, then label for full determinism.
  std::sort(candidates.begin(), candidates.end(),
            [](const SnappedMatch& a, const SnappedMatch& b) {
              if (a.rule->priority != b.rule->priority)
                return a.rule->priority > b.rule->priority;
              if (a.first_tok != b.first_tok) return a.first_tok < b.first_tok;
              if (a.last_tok != b.last_tok) return a.last_tok > b.last_tok;
              return a.rule->type_label < b.rule->type_label;
            });

  std::vector<bool> taken(sentence.tokens.size(), false);
  std::vector<SnappedMatch> chosen;
  for (const auto& c : candidates) {
    bool overlap = false;
    for (size_t t = c.first_tok; t <= c.last_tok; ++t)
      if (taken[t]) {
        overlap = true;
        break;
      }
    if (overlap) continue;
    for (size_t t = c.first_tok; t <= c.last_tok; ++t) taken[t] = true;
    chosen.push_back(c);
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const SnappedMatch& a, const SnappedMatch& b) {
              return a.first_tok < b.first_tok;
            });

  std::u32string stext = utf8_decode(sentence.text);
  for (const auto& c : chosen) {
    EntityMention m;
    m.doc_id = sentence.doc_id;
    m.sent_index = sentence.sent_index;
    m.first_tok = c.first_tok;
    m.last_tok = c.last_tok;
    size_t a = sentence.tokens[c.first_tok].begin - sentence.begin;
    size_t b = sentence.tokens[c.last_tok].end - sentence.begin;
    m.surface = utf8_encode(std::u32string_view(stext).substr(a, b - a));
    m.coarse_label = c.rule->type_label;
    m.provenance = MentionProvenance::pattern;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<LabelingFunction> load_labeling_functions(
    std::string_view text, const OntologySchema& schema) {
  std::vector<LabelingFunction> out;
  int lineno = 0;
  for (const auto& raw : split_lines(text)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_ws(line);
    if (fields.size() < 5 || fields[0] != "lf")
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 'lf <name> <relation> <window> <cues>'");
    LabelingFunction lf;
    lf.name = fields[1];
    const RelationDef* rel = schema.find_relation(fields[2]);
    if (rel == nullptr)
      throw ValidationError("line " + std::to_string(lineno) +
                            ": relation '" + fields[2] + "' not in schema");
    lf.relation = *rel;
    int window = std::stoi(fields[3]);
    if (window < 1)
      throw ValidationError("line " + std::to_string(lineno) +
                            ": window must be >= 1");
    lf.window = static_cast<size_t>(window);
    // Cues are everything after the window field, '|'-separated; a cue may
    // be a multi-word phrase.
    size_t cue_pos = line.find(fields[3]) + fields[3].size();
    std::string cue_text = trim(line.substr(cue_pos));
    for (const auto& cue : split_on(cue_text, '|')) {
      auto toks = tokenize(trim(cue), 0);
      if (toks.empty()) continue;
      std::vector<std::string> seq;
      for (const auto& t : toks) seq.push_back(fold_case(t.text));
      lf.cues.push_back(std::move(seq));
    }
    if (lf.cues.empty())
      throw ValidationError("line " + std::to_string(lineno) +
                            ": labeling function has no cues");
    out.push_back(std::move(lf));
  }
  return out;
}

const std::string& default_labeling_functions_text() {
  static const std::string text = R"(# Relation labeling functions: cue lexicons between person mentions.
lf lf_spouse spouse_of 6 married|wed|husband of|wife of|spouse of
lf lf_parent parent_of 6 father of|mother of|parent of
lf lf_child child_of 6 son of|daughter of|child of
lf lf_sibling sibling_of 6 brother of|sister of|sibling of
lf lf_relative relative_of 6 cousin of|uncle of|aunt of|nephew of|niece of
lf lf_colleague colleague_of 6 works with|worked with|colleague of
lf lf_classmate classmate_of 6 classmate|classmates|class mate|studied with
lf lf_successor successor_of 6 succeeded|successor of
lf lf_opponent opponent_of 6 defeated|ran against|opponent of
)";
  return text;
}

std::vector<RelationCandidate> apply_labeling_functions(
    const Sentence& sentence, const std::vector<EntityMention>& mentions,
    const std::vector<LabelingFunction>& lfs) {
  std::vector<RelationCandidate> out;

  std::vector<const EntityMention*> persons;
  for (const auto& m : mentions)
    if (m.is_person()) persons.push_back(&m);
  if (persons.size() < 2) return out;
  std::sort(persons.begin(), persons.end(),
            [](const EntityMention* a, const EntityMention* b) {
              return a->first_tok < b->first_tok;
            });

  std::vector<std::string> folded;
  folded.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) folded.push_back(fold_case(t.text));

  auto cue_in_gap = [&](const LabelingFunction& lf, size_t gap_begin,
                        size_t gap_end) {
    // Cue phrase fully inside [gap_begin, gap_end), within `window` tokens
    // of either mention boundary.
    for (const auto& cue : lf.cues) {
      if (cue.size() > gap_end - gap_begin) continue;
      for (size_t s = gap_begin; s + cue.size() <= gap_end; ++s) {
        bool match = true;
        for (size_t k = 0; k < cue.size(); ++k)
          if (folded[s + k] != cue[k]) {
            match = false;
            break;
          }
        if (!match) continue;
        size_t left_dist = s - gap_begin + 1;
        size_t right_dist = gap_end - (s + cue.size()) + 1;
        if (left_dist <= lf.window && right_dist <= lf.window) return true;
      }
    }
    return false;
  };

  for (size_t i = 0; i < persons.size(); ++i) {
    for (size_t j = 0; j < persons.size(); ++j) {
      if (i == j) continue;
      const EntityMention& head = *persons[i];
      const EntityMention& tail = *persons[j];
      const EntityMention& left = head.first_tok <= tail.first_tok ? head : tail;
      const EntityMention& right = head.first_tok <= tail.first_tok ? tail : head;
      if (left.last_tok >= right.first_tok) continue;  // overlapping spans
      size_t gap_begin = left.last_tok + 1;
      size_t gap_end = right.first_tok;

      // Skip pairs with another person mention in between: the cue evidence
      // would be ambiguous about which pair it connects.
      bool intervening = false;
      for (const auto* p : persons) {
        if (p == &head || p == &tail) continue;
        if (p->first_tok >= gap_begin && p->last_tok < gap_end) {
          intervening = true;
          break;
        }
      }
      if (intervening) continue;

      for (const auto& lf : lfs) {
        if (lf.relation.symmetric) {
          // Canonical ordering only: lexicographic by surface, then by
          // position for identical surfaces.
          bool canonical =
              head.surface < tail.surface ||
              (head.surface == tail.surface && head.first_tok < tail.first_tok);
          if (!canonical) continue;
        }
        if (!cue_in_gap(lf, gap_begin, gap_end)) continue;
        RelationCandidate cand;
        cand.head = head;
        cand.tail = tail;
        cand.relation = lf.relation.name;
        cand.lf_name = lf.name;
        out.push_back(std::move(cand));
      }
    }
  }
  return out;
}

const std::map<std::string, TypePath>& default_field_types() {
  static const std::map<std::string, TypePath> mapping = {
      {"name", TypePath::parse("/person/name")},
      {"email", TypePath::parse("/contact/email")},
      {"location", TypePath::parse("/location")},
      {"website", TypePath::parse("/contact/website")},
      {"phone", TypePath::parse("/contact/phone")},
  };
  return mapping;
}

std::vector<EntityMention> project_gazetteer_labels(
    const RecordTable& records, const Corpus& corpus,
    const std::map<std::string, TypePath>& field_types) {
  if (records.rows.empty()) throw EmptyRecords("record table is empty");

  // One gazetteer per mapped field, deduplicated across records.
  std::map<std::string, std::set<std::string>> values_by_field;
  for (const auto& row : records.rows)
    for (const auto& [field, value] : row)
      if (!trim(value).empty() && field_types.count(field))
        values_by_field[field].insert(value);

  std::vector<Gazetteer> gazetteers;
  for (const auto& [field, values] : values_by_field) {
    Gazetteer g(field_types.at(field));
    for (const auto& v : values) g.add_entry(v);
    gazetteers.push_back(std::move(g));
  }

  std::vector<EntityMention> out;
  for (const auto& doc_sentences : corpus.sentences)
    for (const auto& sentence : doc_sentences)
      for (auto& m : gazetteer_annotate(sentence, gazetteers))
        out.push_back(std::move(m));
  return out;
}

std::optional<TypePath> primary_label(const EntityMention& m) {
  std::optional<TypePath> best;
  auto consider = [&](const TypePath& p) {
    if (!best || p.depth() > best->depth() ||
        (p.depth() == best->depth() && p < *best))
      best = p;
  };
  for (const auto& l : m.fine_labels) consider(l);
  if (!best && m.coarse_label) best = m.coarse_label;
  return best;
}

std::string mentions_to_jsonl(const std::vector<EntityMention>& mentions) {
  std::string out;
  for (const auto& m : mentions) {
    auto label = primary_label(m);
    nlohmann::json obj = {
        {"doc_id", m.doc_id},
        {"sent_index", m.sent_index},
        {"start_tok", m.first_tok},
        {"end_tok", m.last_tok},
        {"surface", m.surface},
        {"label", label ? label->str() : ""},
        {"provenance", std::string(provenance_name(m.provenance))}};
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<EntityMention> mentions_from_jsonl(std::string_view text) {
  std::vector<EntityMention> out;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad mention JSON line: ") + e.what());
    }
    EntityMention m;
    m.doc_id = obj.at("doc_id").get<std::string>();
    m.sent_index = obj.at("sent_index").get<size_t>();
    m.first_tok = obj.at("start_tok").get<size_t>();
    m.last_tok = obj.at("end_tok").get<size_t>();
    m.surface = obj.at("surface").get<std::string>();
    m.provenance =
        provenance_from_name(obj.at("provenance").get<std::string>());
    std::string label = obj.at("label").get<std::string>();
    if (!label.empty()) {
      TypePath path = TypePath::parse(label);
      if (m.provenance == MentionProvenance::classifier)
        m.fine_labels.insert(path);
      else
        m.coarse_label = path;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string candidates_to_tsv(const std::vector<RelationCandidate>& cands) {
  std::string out;
  for (const auto& c : cands) {
    out += c.head.doc_id;
    out.push_back('\t');
    out += std::to_string(c.head.sent_index);
    out.push_back('\t');
    out += normalize_ws(c.head.surface);
    out.push_back('\t');
    out += c.relation;
    out.push_back('\t');
    out += normalize_ws(c.tail.surface);
    out.push_back('\t');
    out += c.lf_name;
    out.push_back('\n');
  }
  return out;
}

}  // namespace ontopop
