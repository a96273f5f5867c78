#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "ontopop/pipeline.hpp"
#include "ontopop/util.hpp"

using namespace ontopop;
namespace fs = std::filesystem;

namespace {

const std::string kData = ONTOPOP_DATA_DIR;

PipelineConfig fixture_config(const std::string& out_dir) {
  PipelineConfig cfg = PipelineConfig::parse(read_file(kData + "/pipeline.conf"));
  cfg.corpus_dir = kData + "/fixture_corpus";
  cfg.schema_path = kData + "/schema.pdet";
  cfg.gazetteers_path = kData + "/gazetteers.gaz";
  cfg.rules_path = kData + "/rules.rules";
  cfg.lfs_path = kData + "/lfs.lf";
  cfg.out_dir = out_dir;
  return cfg;
}

std::string temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("config parsing: keys, comments, errors") {
  PipelineConfig cfg = PipelineConfig::parse(
      "# comment\n"
      "corpus_dir = /tmp/corpus\n"
      "schema = schema.pdet\n"
      "seed = 42\n"
      "lambda = 0.25\n"
      "link_model = gcn   # inline comment\n"
      "classifier_encoder = attentive\n"
      "train_models = false\n");
  CHECK(cfg.corpus_dir == "/tmp/corpus");
  CHECK(cfg.seed == 42);
  CHECK(cfg.relemb.lambda == 0.25);
  CHECK(cfg.link_model == LinkModelKind::gcn);
  CHECK(cfg.classifier.encoder == EncoderKind::attentive);
  CHECK_FALSE(cfg.train_models);

  CHECK_THROWS_AS(PipelineConfig::parse("bogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("seed =\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("classifier_epochs = soon\n"),
                  ConfigError);
}

TEST_CASE("missing paths fail validation before any work") {
  PipelineConfig cfg;
  cfg.corpus_dir = "/nonexistent/corpus";
  cfg.schema_path = kData + "/schema.pdet";
  CHECK_THROWS_AS(cfg.validate_for_run(), ConfigError);

  PipelineConfig cfg2 = fixture_config("/tmp/unused");
  cfg2.schema_path = "/nonexistent/schema.pdet";
  CHECK_THROWS_AS(cfg2.validate_for_run(), ConfigError);

  PipelineConfig cfg3 = fixture_config("/tmp/unused");
  cfg3.schema_path = "";
  CHECK_THROWS_AS(cfg3.validate_for_run(), ConfigError);
}

TEST_CASE("token_coarse_tags aligns annotator output with tokens") {
  Document d{"d", "write ann@example.org now", std::nullopt};
  Sentence s = segment(d)[0];
  auto rules = load_rules(default_rules_text());
  auto mentions = pattern_annotate(s, rules);
  auto tags = token_coarse_tags(s, mentions);
  REQUIRE(tags.size() == s.tokens.size());
  CHECK(tags[0] == "NONE");
  // the email span covers several raw tokens
  bool saw_email = false;
  for (const auto& t : tags) saw_email |= t == "/contact/email";
  CHECK(saw_email);
}

TEST_CASE("annotate_corpus merges gazetteer and pattern mentions") {
  Corpus corpus = load_corpus_dir(kData + "/fixture_corpus");
  auto gazetteers = load_gazetteers(read_file(kData + "/gazetteers.gaz"));
  auto rules = load_rules(read_file(kData + "/rules.rules"));
  auto mentions = annotate_corpus(corpus, gazetteers, rules);
  REQUIRE(!mentions.empty());

  size_t persons = 0, patterns = 0;
  for (const auto& m : mentions) {
    if (m.is_person()) ++persons;
    if (m.provenance == MentionProvenance::pattern) ++patterns;
  }
  CHECK(persons >= 8);   // five distinct people across three documents
  CHECK(patterns >= 4);  // emails, years, zip, date

  // pattern mentions never overlap gazetteer mentions after the merge
  for (size_t i = 0; i < mentions.size(); ++i) {
    for (size_t j = i + 1; j < mentions.size(); ++j) {
      const auto& a = mentions[i];
      const auto& b = mentions[j];
      if (a.doc_id != b.doc_id || a.sent_index != b.sent_index) continue;
      bool overlap = a.first_tok <= b.last_tok && b.first_tok <= a.last_tok;
      CHECK_FALSE(overlap);
    }
  }
}

TEST_CASE("bootstrap examples carry closed coarse targets") {
  Corpus corpus = load_corpus_dir(kData + "/fixture_corpus");
  auto schema = OntologySchema::load(read_file(kData + "/schema.pdet"));
  auto gazetteers = load_gazetteers(read_file(kData + "/gazetteers.gaz"));
  auto rules = load_rules(read_file(kData + "/rules.rules"));
  auto mentions = annotate_corpus(corpus, gazetteers, rules);
  auto examples = bootstrap_examples(corpus, mentions, schema, 6);
  REQUIRE(!examples.empty());
  for (const auto& ex : examples) {
    CHECK(!ex.ctx.mention.empty());
    CHECK(!ex.labels.empty());
    for (const auto& l : ex.labels)
      for (const auto& a : ancestors(l)) CHECK(ex.labels.count(a) == 1);
  }
}

TEST_CASE("full pipeline on the fixture corpus") {
  std::string out = temp_dir("ontopop_pipeline_test");
  PipelineConfig cfg = fixture_config(out);
  nlohmann::json report = run_pipeline(cfg);

  CHECK(report["totals"]["documents"] == 3);
  CHECK(report["totals"]["persons"].get<size_t>() == 5);
  CHECK(report["totals"]["mentions"].get<size_t>() > 0);
  CHECK(report["totals"]["lf_edges"].get<size_t>() >= 1);
  CHECK(report["totals"]["predicted_edges"].get<size_t>() >= 1);

  for (const char* name :
       {"sentences.jsonl", "mentions.jsonl", "candidates.tsv", "graph.nt",
        "graph_edges.tsv", "stats.json", "report.json"}) {
    CHECK(fs::exists(fs::path(out) / name));
  }

  // every person node carries at least one attribute
  auto schema = std::make_shared<const OntologySchema>(
      OntologySchema::load(read_file(kData + "/schema.pdet")));
  OntologyGraph graph = OntologyGraph::import_ntriples(
      read_file((fs::path(out) / "graph.nt").string()), schema);
  REQUIRE(graph.nodes().size() == 5);
  for (const auto& node : graph.nodes())
    CHECK(!node.attributes.empty());

  // at least one labeling-function edge and one predicted edge survive
  size_t lf = 0, predicted = 0;
  for (const auto& e : graph.edges()) {
    if (e.provenance == EdgeProvenance::labeling_function) ++lf;
    if (e.provenance == EdgeProvenance::predicted) ++predicted;
  }
  CHECK(lf >= 1);
  CHECK(predicted >= 1);
  fs::remove_all(out);
}

TEST_CASE("empty corpus produces a zero-count report without failing") {
  std::string corpus_dir = temp_dir("ontopop_empty_corpus");
  std::string out = temp_dir("ontopop_empty_out");
  PipelineConfig cfg = fixture_config(out);
  cfg.corpus_dir = corpus_dir;
  nlohmann::json report = run_pipeline(cfg);
  CHECK(report["totals"]["documents"] == 0);
  CHECK(report["totals"]["mentions"] == 0);
  CHECK(report["totals"]["persons"] == 0);
  CHECK(read_file((fs::path(out) / "graph.nt").string()).empty());
  fs::remove_all(corpus_dir);
  fs::remove_all(out);
}

TEST_CASE("stats JSON is Table-1 shaped") {
  Corpus corpus = load_corpus_dir(kData + "/fixture_corpus");
  auto gazetteers = load_gazetteers(read_file(kData + "/gazetteers.gaz"));
  auto rules = load_rules(read_file(kData + "/rules.rules"));
  auto mentions = annotate_corpus(corpus, gazetteers, rules);
  nlohmann::json stats = stats_json(corpus, mentions);
  for (const char* key :
       {"documents", "sentences", "entity_mentions", "unique_entity_mentions",
        "unique_entity_types"}) {
    REQUIRE(stats.contains(key));
  }
  CHECK(stats["documents"] == 3);
  CHECK(stats["entity_mentions"].get<uint64_t>() >=
        stats["unique_entity_mentions"].get<uint64_t>());
}

TEST_CASE("entity keys normalize like person resolution") {
  CHECK(entity_key("John  SMITH") == "john smith");
  CHECK(entity_key("  Ann Lee ") == "ann lee");
}
