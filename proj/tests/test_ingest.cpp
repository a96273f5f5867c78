#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ontopop/ingest.hpp"
#include "ontopop/util.hpp"

using namespace ontopop;

namespace {

Document doc(const std::string& text) { return {"d", text, std::nullopt}; }

}  // namespace

TEST_CASE("two terminated clauses split into two sentences") {
  auto s = split_sentences(doc("He won. She lost."));
  REQUIRE(s.size() == 2);
  CHECK(s[0].text == "He won.");
  CHECK(s[1].text == "She lost.");
  CHECK(s[0].sent_index == 0);
  CHECK(s[1].sent_index == 1);
}

TEST_CASE("abbreviation guard keeps Dr. Smith together") {
  // Expectations come from a hand-segmented fixture set.
  CHECK(split_sentences(doc("Dr. Smith won.")).size() == 1);
  CHECK(split_sentences(doc("Mr. Jones met Mrs. Jones.")).size() == 1);
  CHECK(split_sentences(doc("He lives on St. Mary Road. Prof. Kim agrees."))
            .size() == 2);
  CHECK(split_sentences(doc("J. Smith won. He celebrated.")).size() == 2);
  // Single-letter initials do not split.
  auto s = split_sentences(doc("John F. Kennedy spoke."));
  CHECK(s.size() == 1);
}

TEST_CASE("empty and whitespace-only input gives no sentences") {
  CHECK(split_sentences(doc("")).empty());
  CHECK(split_sentences(doc("   \n\t  ")).empty());
}

TEST_CASE("question and exclamation boundaries") {
  CHECK(split_sentences(doc("Really? Yes! Fine.")).size() == 3);
  // Lowercase after the terminator is not a boundary.
  CHECK(split_sentences(doc("pi is approx. three")).size() == 1);
}

TEST_CASE("sentence spans cover all non-whitespace characters") {
  std::string text = "He won. She lost.  Trailing text without period";
  auto sentences = split_sentences(doc(text));
  std::u32string original = utf8_decode(text);
  std::u32string covered(original.size(), U' ');
  for (const auto& s : sentences)
    for (size_t i = s.begin; i < s.end; ++i) covered[i] = original[i];
  for (size_t i = 0; i < original.size(); ++i) {
    if (original[i] != U' ' && original[i] != U'\n' && original[i] != U'\t')
      CHECK(covered[i] == original[i]);
  }
}

TEST_CASE("tokenize: words, digits, punctuation") {
  auto toks = tokenize("born in 1962.", 0);
  REQUIRE(toks.size() == 4);
  CHECK(toks[0].text == "born");
  CHECK(toks[1].text == "in");
  CHECK(toks[2].text == "1962");
  CHECK(toks[3].text == ".");
  CHECK(toks[0].shape == TokenShape::alpha);
  CHECK(toks[1].shape == TokenShape::alpha);
  CHECK(toks[2].shape == TokenShape::digit);
  CHECK(toks[3].shape == TokenShape::punct);
}

TEST_CASE("tokenize: capitalized entity mention") {
  auto toks = tokenize("Brigham Young University", 0);
  REQUIRE(toks.size() == 3);
  for (const auto& t : toks) CHECK(t.shape == TokenShape::capitalized);
}

TEST_CASE("tokenize: hyphens split") {
  // The shipped convention: punctuation always separates.
  auto toks = tokenize("e-mail", 0);
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].text == "e");
  CHECK(toks[1].text == "-");
  CHECK(toks[2].text == "mail");
}

TEST_CASE("tokenize offsets honor the base offset") {
  auto toks = tokenize("ab cd", 10);
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].begin == 10);
  CHECK(toks[0].end == 12);
  CHECK(toks[1].begin == 13);
  CHECK(toks[1].end == 15);
}

TEST_CASE("token shapes cover the full tag set") {
  CHECK(classify_token_shape("usa") == TokenShape::alpha);
  CHECK(classify_token_shape("Usa") == TokenShape::capitalized);
  CHECK(classify_token_shape("USA") == TokenShape::all_caps);
  CHECK(classify_token_shape("I") == TokenShape::capitalized);
  CHECK(classify_token_shape("42") == TokenShape::digit);
  CHECK(classify_token_shape("x86") == TokenShape::mixed);
  CHECK(classify_token_shape("McBain") == TokenShape::mixed);
  CHECK(classify_token_shape("-") == TokenShape::punct);
}

TEST_CASE("offset round trip over unicode text") {
  std::string text = "Müller façade — done. Καλά 42.";
  Document d = doc(text);
  std::u32string scalars = utf8_decode(text);
  for (const auto& s : segment(d)) {
    for (const auto& t : s.tokens) {
      std::string substr = utf8_encode(
          std::u32string_view(scalars).substr(t.begin, t.end - t.begin));
      CHECK(substr == t.text);
    }
  }
}

TEST_CASE("segmentation is deterministic") {
  Document d = doc("Dr. Who met Ms. Marple. They talked for 2 hours!");
  auto a = segment(d);
  auto b = segment(d);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    REQUIRE(a[i].tokens.size() == b[i].tokens.size());
    for (size_t j = 0; j < a[i].tokens.size(); ++j) {
      CHECK(a[i].tokens[j].text == b[i].tokens[j].text);
      CHECK(a[i].tokens[j].begin == b[i].tokens[j].begin);
    }
  }
}

TEST_CASE("corpus stats: counts, case-folded uniqueness, label variety") {
  std::vector<MentionLabel> mentions = {
      {"Ann", {"/person"}},
      {"Ann", {"/person"}},
  };
  CorpusStats stats = corpus_stats(1, 2, mentions);
  CHECK(stats.documents == 1);
  CHECK(stats.sentences == 2);
  CHECK(stats.entity_mentions == 2);
  CHECK(stats.unique_entity_mentions == 1);
  CHECK(stats.unique_entity_types == 1);

  CorpusStats empty = corpus_stats(0, 0, {});
  CHECK(empty.documents == 0);
  CHECK(empty.sentences == 0);
  CHECK(empty.entity_mentions == 0);
  CHECK(empty.unique_entity_mentions == 0);
  CHECK(empty.unique_entity_types == 0);

  std::vector<MentionLabel> mixed = {
      {"ANN", {"/person"}},
      {"ann", {"/person", "/person/name"}},
      {"Bob", {"/person"}},
  };
  CorpusStats m = corpus_stats(2, 3, mixed);
  CHECK(m.unique_entity_mentions == 2);
  CHECK(m.unique_entity_types == 2);
}

TEST_CASE("sentence JSONL dump shape") {
  Document d = doc("Ann won.");
  auto sentences = segment(d);
  std::string jsonl = sentences_to_jsonl(sentences);
  CHECK(jsonl.find("\"doc_id\":\"d\"") != std::string::npos);
  CHECK(jsonl.find("\"shape\":\"capitalized\"") != std::string::npos);
  CHECK(jsonl.back() == '\n');
}
