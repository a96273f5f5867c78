#include "ontopop/ingest.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ontopop/errors.hpp"
#include "ontopop/util.hpp"

namespace ontopop {

namespace {

bool is_space_cp(char32_t c) {
  switch (c) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case U' ':
    case U' ':
    case U' ':
    case U' ':
    case U'　':
      return true;
    default:
      return c >= U' ' && c <= U' ';
  }
}

bool is_digit_cp(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_ascii_letter(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z');
}

// Common non-ASCII punctuation; everything else >= U+0080 that is not
// whitespace counts as a letter. This is a fixed convention, not full
// Unicode category data.
bool is_unicode_punct(char32_t c) {
  if (c >= U'‐' && c <= U'‧') return true;  // dashes, quotes
  if (c >= U'‰' && c <= U'⁞') return true;
  switch (c) {
    case U'¡':
    case U'«':
    case U'·':
    case U'»':
    case U'¿':
    case U'、':
    case U'。':
      return true;
    default:
      return false;
  }
}

bool is_letter_cp(char32_t c) {
  if (is_ascii_letter(c)) return true;
  if (c < 0x80) return false;
  return !is_space_cp(c) && !is_unicode_punct(c);
}

bool is_word_cp(char32_t c) { return is_letter_cp(c) || is_digit_cp(c); }

bool is_upper_cp(char32_t c) { return c >= U'A' && c <= U'Z'; }
bool is_lower_ascii(char32_t c) { return c >= U'a' && c <= U'z'; }

TokenShape classify_shape(const std::u32string& tok) {
  size_t letters = 0, digits = 0, uppers = 0, lowers = 0;
  for (char32_t c : tok) {
    if (is_digit_cp(c)) {
      ++digits;
    } else if (is_letter_cp(c)) {
      ++letters;
      if (is_upper_cp(c)) ++uppers;
      // Non-ASCII letters carry no case information; count as lowercase.
      if (is_lower_ascii(c) || c >= 0x80) ++lowers;
    }
  }
  if (letters == 0 && digits == 0) return TokenShape::punct;
  if (letters == 0) return TokenShape::digit;
  if (digits > 0) return TokenShape::mixed;
  if (uppers == 0) return TokenShape::alpha;
  if (uppers == letters) {
    return letters == 1 ? TokenShape::capitalized : TokenShape::all_caps;
  }
  if (is_upper_cp(tok[0]) && uppers == 1) return TokenShape::capitalized;
  return TokenShape::mixed;
}

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> abbrevs = {
      "mr", "mrs", "dr", "prof", "st", "jr", "sr", "vs", "etc"};
  return abbrevs;
}

// The word immediately before position `i` (exclusive), as lowercase ASCII.
std::string word_before(const std::u32string& text, size_t i) {
  size_t end = i;
  size_t start = end;
  while (start > 0 && is_word_cp(text[start - 1])) --start;
  std::string out;
  for (size_t k = start; k < end; ++k) {
    char32_t c = text[k];
    if (c < 0x80)
      out.push_back(static_cast<char>(
          c >= U'A' && c <= U'Z' ? c - U'A' + U'a' : c));
    else
      out += utf8_encode(c);
  }
  return out;
}

}  // namespace

std::string_view shape_name(TokenShape s) {
  switch (s) {
    case TokenShape::alpha:
      return "alpha";
    case TokenShape::capitalized:
      return "capitalized";
    case TokenShape::all_caps:
      return "all_caps";
    case TokenShape::digit:
      return "digit";
    case TokenShape::mixed:
      return "mixed";
    case TokenShape::punct:
      return "punct";
  }
  return "alpha";
}

TokenShape shape_from_name(std::string_view name) {
  if (name == "alpha") return TokenShape::alpha;
  if (name == "capitalized") return TokenShape::capitalized;
  if (name == "all_caps") return TokenShape::all_caps;
  if (name == "digit") return TokenShape::digit;
  if (name == "mixed") return TokenShape::mixed;
  if (name == "punct") return TokenShape::punct;
  throw ParseError("unknown token shape: " + std::string(name));
}

std::vector<Sentence> split_sentences(const Document& doc) {
  std::vector<Sentence> out;
  std::u32string text = utf8_decode(doc.text);
  size_t n = text.size();
  if (n == 0) return out;

  std::vector<std::pair<size_t, size_t>> raw_spans;
  size_t start = 0;
  size_t i = 0;
  while (i < n) {
    char32_t c = text[i];
    if (c == U'.' || c == U'!' || c == U'?') {
      // Swallow a run of terminators ("?!", "...").
      size_t term_end = i + 1;
      while (term_end < n && (text[term_end] == U'.' ||
                              text[term_end] == U'!' ||
                              text[term_end] == U'?'))
        ++term_end;
      // Boundary requires whitespace then a capital letter.
      size_t j = term_end;
      while (j < n && is_space_cp(text[j])) ++j;
      bool boundary = j > term_end && j < n && is_upper_cp(text[j]);
      if (boundary && c == U'.' && term_end == i + 1) {
        std::string prev = word_before(text, i);
        bool initial = prev.size() == 1 && i >= 1 && is_upper_cp(text[i - 1]);
        if (abbreviations().count(prev) > 0 || initial) boundary = false;
      }
      if (boundary) {
        raw_spans.emplace_back(start, term_end);
        start = j;
        i = j;
        continue;
      }
      i = term_end;
      continue;
    }
    ++i;
  }
  if (start < n) raw_spans.emplace_back(start, n);

  for (auto [a, b] : raw_spans) {
    while (a < b && is_space_cp(text[a])) ++a;
    while (b > a && is_space_cp(text[b - 1])) --b;
    if (a == b) continue;
    Sentence s;
    s.doc_id = doc.doc_id;
    s.sent_index = out.size();
    s.begin = a;
    s.end = b;
    s.text = utf8_encode(std::u32string_view(text).substr(a, b - a));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Token> tokenize(const std::string& sentence_text,
                            size_t base_offset) {
  std::vector<Token> out;
  std::u32string text = utf8_decode(sentence_text);
  size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    char32_t c = text[i];
    if (is_space_cp(c)) {
      ++i;
      continue;
    }
    size_t start = i;
    if (is_word_cp(c)) {
      while (i < n && is_word_cp(text[i])) ++i;
    } else {
      ++i;  // single punctuation mark
    }
    Token tok;
    std::u32string piece = text.substr(start, i - start);
    tok.text = utf8_encode(piece);
    tok.begin = base_offset + start;
    tok.end = base_offset + i;
    tok.shape = classify_shape(piece);
    out.push_back(std::move(tok));
  }
  return out;
}

TokenShape classify_token_shape(const std::string& token_text) {
  return classify_shape(utf8_decode(token_text));
}

std::vector<Sentence> segment(const Document& doc) {
  std::vector<Sentence> sentences = split_sentences(doc);
  for (auto& s : sentences) s.tokens = tokenize(s.text, s.begin);
  return sentences;
}

Corpus load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus corpus;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    Document doc;
    doc.doc_id = path.stem().string();
    doc.text = read_file(path.string());
    doc.source_uri = "file://" + path.string();
    corpus.sentences.push_back(segment(doc));
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

CorpusStats corpus_stats(uint64_t documents, uint64_t sentences,
                         const std::vector<MentionLabel>& mentions) {
  CorpusStats stats;
  stats.documents = documents;
  stats.sentences = sentences;
  stats.entity_mentions = mentions.size();
  std::unordered_set<std::string> surfaces;
  std::unordered_set<std::string> types;
  for (const auto& m : mentions) {
    surfaces.insert(fold_case(m.surface));
    for (const auto& l : m.labels) types.insert(l);
  }
  stats.unique_entity_mentions = surfaces.size();
  stats.unique_entity_types = types.size();
  return stats;
}

CorpusStats corpus_stats(const Corpus& corpus,
                         const std::vector<MentionLabel>& mentions) {
  uint64_t sentences = 0;
  for (const auto& doc : corpus.sentences) sentences += doc.size();
  return corpus_stats(corpus.docs.size(), sentences, mentions);
}

std::string sentences_to_jsonl(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : s.tokens) {
      toks.push_back({{"text", t.text},
                      {"start", t.begin},
                      {"end", t.end},
                      {"shape", std::string(shape_name(t.shape))}});
    }
    nlohmann::json obj = {{"doc_id", s.doc_id},
                          {"sent_index", s.sent_index},
                          {"text", s.text},
                          {"tokens", toks}};
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace ontopop
