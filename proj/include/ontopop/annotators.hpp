#pragma once
// Rule-based personal-data annotators: gazetteer (dictionary) matching,
// regex pattern rules for high-precision coarse types, and labeling
// functions that emit relation candidates between person mentions.
// Annotator objects are immutable after construction; annotation is a pure
// function of the sentence.

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "ontopop/ingest.hpp"
#include "ontopop/schema.hpp"

namespace ontopop {

enum class MentionProvenance { gazetteer, pattern, classifier, manual };
std::string_view provenance_name(MentionProvenance p);
MentionProvenance provenance_from_name(std::string_view name);

struct EntityMention {
  std::string doc_id;
  size_t sent_index = 0;
  size_t first_tok = 0;  // inclusive token indices into the sentence
  size_t last_tok = 0;
  std::string surface;
  std::optional<TypePath> coarse_label;
  std::set<TypePath> fine_labels;
  MentionProvenance provenance = MentionProvenance::manual;

  bool is_person() const;  // coarse or fine label rooted at /person
};

class Gazetteer {
 public:
  Gazetteer(TypePath type_label, bool case_sensitive = false)
      : type_label_(std::move(type_label)), case_sensitive_(case_sensitive) {}

  // Entries are tokenized with the shared tokenizer; empty-token entries
  // are rejected.
  void add_entry(const std::string& surface);

  const TypePath& type_label() const { return type_label_; }
  bool case_sensitive() const { return case_sensitive_; }
  size_t size() const { return entries_.size(); }

  // Longest entry matching the token stream at position `pos`; 0 if none.
  size_t longest_match(const std::vector<Token>& tokens, size_t pos) const;

 private:
  TypePath type_label_;
  bool case_sensitive_;
  std::set<std::vector<std::string>> entries_;  // token sequences
  size_t max_len_ = 0;
};

// Leftmost-longest non-overlapping matching over token sequences across all
// gazetteers. Ties on the same span resolve by type label, ascending.
std::vector<EntityMention> gazetteer_annotate(
    const Sentence& sentence, const std::vector<Gazetteer>& gazetteers);

// Gazetteer file: `@type <slash-path>` header, optional `@case_sensitive`,
// then one entry per line. A file may hold several headed sections.
std::vector<Gazetteer> load_gazetteers(std::string_view text);

struct PatternRule {
  TypePath type_label;
  std::string pattern;
  int priority = 0;
  std::regex compiled;
};

// Rule pack format: `rule <path> <priority> /<regex>/` per line.
// Throws RuleCompileError if a regex does not compile.
std::vector<PatternRule> load_rules(std::string_view text);

// The shipped coarse rule pack: email, url, phone, zip, date, year, number.
const std::string& default_rules_text();

// Regex matches snapped outward to token boundaries; overlaps resolved by
// priority, then leftmost, then longest.
std::vector<EntityMention> pattern_annotate(
    const Sentence& sentence, const std::vector<PatternRule>& rules);

struct LabelingFunction {
  std::string name;
  RelationDef relation;
  std::vector<std::vector<std::string>> cues;  // tokenized, case-folded
  size_t window = 3;  // max token distance between cue and either mention
};

// LF file format: `lf <name> <relation> <window> <cue1|cue2|...>`.
// Relations are validated against the schema.
std::vector<LabelingFunction> load_labeling_functions(
    std::string_view text, const OntologySchema& schema);

const std::string& default_labeling_functions_text();

struct RelationCandidate {
  EntityMention head;
  EntityMention tail;
  std::string relation;
  std::string lf_name;
};

// Emits one candidate per (person pair, matching LF). A cue must sit
// strictly between the two mentions, within `window` tokens of each, with
// no third person mention in between. Symmetric relations emit only the
// canonical ordering (lexicographic by surface).
std::vector<RelationCandidate> apply_labeling_functions(
    const Sentence& sentence, const std::vector<EntityMention>& mentions,
    const std::vector<LabelingFunction>& lfs);

// Structured-record projection: builds one gazetteer per field type from
// record values and annotates the whole corpus with them.
struct RecordTable {
  std::vector<std::map<std::string, std::string>> rows;
};

// Default field-name -> type-path mapping (name, email, location, website,
// phone). Unmapped fields are skipped.
const std::map<std::string, TypePath>& default_field_types();

std::vector<EntityMention> project_gazetteer_labels(
    const RecordTable& records, const Corpus& corpus,
    const std::map<std::string, TypePath>& field_types = default_field_types());

// The mention's most specific label: deepest fine label (ties break
// lexicographically), else the coarse label.
std::optional<TypePath> primary_label(const EntityMention& mention);

// Interchange formats.
std::string mentions_to_jsonl(const std::vector<EntityMention>& mentions);
std::vector<EntityMention> mentions_from_jsonl(std::string_view text);
std::string candidates_to_tsv(const std::vector<RelationCandidate>& cands);

}  // namespace ontopop
