#pragma once
// End-to-end orchestration: ingest -> annotate -> classify -> extract
// relations -> populate -> link-predict -> export. Stages communicate only
// through files in the output directory; all randomness derives from the
// single config seed via per-stage seed derivation.

#include <nlohmann/json.hpp>
#include <optional>

#include "ontopop/annotators.hpp"
#include "ontopop/classifier.hpp"
#include "ontopop/config.hpp"
#include "ontopop/graphstore.hpp"
#include "ontopop/linkpred.hpp"
#include "ontopop/relembed.hpp"

namespace ontopop {

// Coarse annotator tag per sentence token, "NONE" where untagged.
std::vector<std::string> token_coarse_tags(
    const Sentence& sentence, const std::vector<EntityMention>& mentions);

// Gazetteer + pattern mentions merged per sentence; pattern mentions that
// overlap a gazetteer mention are dropped (dictionary matches are the
// higher-precision source for the same span).
std::vector<EntityMention> annotate_corpus(
    const Corpus& corpus, const std::vector<Gazetteer>& gazetteers,
    const std::vector<PatternRule>& rules);

std::vector<RelationCandidate> corpus_relation_candidates(
    const Corpus& corpus, const std::vector<EntityMention>& mentions,
    const std::vector<LabelingFunction>& lfs);

// Weakly supervised training data: one example per coarse-labeled mention,
// target = ancestor closure of the coarse label.
std::vector<TrainingExample> bootstrap_examples(
    const Corpus& corpus, const std::vector<EntityMention>& mentions,
    const OntologySchema& schema, int window);

// Runs the classifier over every mention; returns copies carrying decoded
// fine labels with provenance=classifier.
std::vector<EntityMention> classify_mentions(
    const ClassifierModel& model, const Corpus& corpus,
    const std::vector<EntityMention>& mentions, const OntologySchema& schema,
    double threshold);

// Entity names are case-folded whitespace-normalized surfaces, matching
// graphstore person resolution.
std::string entity_key(const std::string& surface);
std::vector<Triple> candidates_to_triples(
    const std::vector<RelationCandidate>& candidates, const Corpus& corpus);

// The full pipeline. Writes all artifacts into config.out_dir and returns
// the run report (also written as report.json). Throws on stage failure.
nlohmann::json run_pipeline(const PipelineConfig& config);

// Table-1-shaped statistics over a mention stream.
nlohmann::json stats_json(const Corpus& corpus,
                          const std::vector<EntityMention>& mentions);

}  // namespace ontopop
