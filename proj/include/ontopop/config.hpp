#pragma once
// Pipeline configuration: a flat, line-oriented `key = value` file (same
// parser family as the schema format). Every path referenced by a run must
// exist when the run starts.

#include <cstdint>
#include <string>

#include "ontopop/classifier.hpp"
#include "ontopop/linkpred.hpp"
#include "ontopop/relembed.hpp"

namespace ontopop {

struct PipelineConfig {
  // Paths. Empty gazetteers/rules/lfs fall back to the built-in packs.
  std::string corpus_dir;
  std::string schema_path;
  std::string gazetteers_path;
  std::string rules_path;
  std::string lfs_path;
  std::string out_dir = "out";
  std::string classifier_model_path;  // reuse an existing checkpoint
  std::string relemb_model_path;

  uint64_t seed = 1;
  bool train_models = true;

  ClassifierConfig classifier;
  RelEmbedConfig relemb;
  LinkPredConfig link;
  LinkModelKind link_model = LinkModelKind::pgnn;

  double decode_threshold = 0.5;
  double link_threshold = 0.5;

  static PipelineConfig parse(std::string_view text);
  static PipelineConfig load(const std::string& path);

  // Throws ConfigError when required paths are missing or do not exist.
  void validate_for_run() const;
};

}  // namespace ontopop
