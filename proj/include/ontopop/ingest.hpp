#pragma once
// Text ingestion: sentence splitting and tokenization with stable character
// offsets, plus corpus-level statistics. All offsets are Unicode scalar
// value indices into the owning document's text, never bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ontopop {

struct Document {
  std::string doc_id;
  std::string text;  // UTF-8
  std::optional<std::string> source_uri;
};

enum class TokenShape { alpha, capitalized, all_caps, digit, mixed, punct };

std::string_view shape_name(TokenShape s);
TokenShape shape_from_name(std::string_view name);

struct Token {
  std::string text;  // UTF-8, equals the document substring of [begin, end)
  size_t begin = 0;  // scalar-value offsets into the document text
  size_t end = 0;
  TokenShape shape = TokenShape::alpha;
};

struct Sentence {
  std::string doc_id;
  size_t sent_index = 0;
  size_t begin = 0;  // scalar-value span into the document text
  size_t end = 0;
  std::string text;  // document substring of [begin, end)
  std::vector<Token> tokens;
};

// Rule-based splitter: boundaries at . ! ? followed by whitespace and a
// capital, guarded by a fixed abbreviation list (Mr, Mrs, Dr, Prof, St, Jr,
// Sr, vs, etc) and single-letter initials. Sentences come back trimmed and
// untokenized; together they cover every non-whitespace character.
std::vector<Sentence> split_sentences(const Document& doc);

// Maximal runs of letters/digits become tokens; every punctuation mark is
// its own token. base_offset shifts token spans into document coordinates.
std::vector<Token> tokenize(const std::string& sentence_text,
                            size_t base_offset);

// Shape of a single already-tokenized piece of text.
TokenShape classify_token_shape(const std::string& token_text);

// split_sentences + tokenize in one pass.
std::vector<Sentence> segment(const Document& doc);

struct Corpus {
  std::vector<Document> docs;
  std::vector<std::vector<Sentence>> sentences;  // parallel to docs
};

// Reads every .txt file in a directory; filename stem becomes doc_id.
// Files are visited in sorted name order.
Corpus load_corpus_dir(const std::string& dir);

struct CorpusStats {
  uint64_t documents = 0;
  uint64_t sentences = 0;
  uint64_t entity_mentions = 0;
  uint64_t unique_entity_mentions = 0;  // case-folded surfaces
  uint64_t unique_entity_types = 0;     // distinct assigned label paths
};

// Decoupled mention record so stats do not depend on the annotator types.
struct MentionLabel {
  std::string surface;
  std::vector<std::string> labels;  // slash-path strings
};

CorpusStats corpus_stats(uint64_t documents, uint64_t sentences,
                         const std::vector<MentionLabel>& mentions);
CorpusStats corpus_stats(const Corpus& corpus,
                         const std::vector<MentionLabel>& mentions);

// JSON-Lines dump, one object per sentence:
// {doc_id, sent_index, text, tokens:[{text,start,end,shape}]}
std::string sentences_to_jsonl(const std::vector<Sentence>& sentences);

}  // namespace ontopop
