#pragma once
// Translational relation embeddings: entities and relations share a
// k-dimensional space where a true triple (h, r, t) has low L1 translation
// energy ||h + r - t||. Relation properties from the schema shape training
// by data augmentation (reversal for symmetric relations, capped 1-step
// closure for transitive ones). An optional sentence-context term
// lambda * ||P s - r|| adds textual evidence to the energy; sentences are
// embedded by a deep-averaging encoder over word and bigram buckets.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ontopop/errors.hpp"
#include "ontopop/schema.hpp"

namespace ontopop {

struct Triple {
  std::string head;
  std::string rel;
  std::string tail;
  std::vector<std::string> sentence;  // empty = no textual context

  bool has_sentence() const { return !sentence.empty(); }
  bool operator==(const Triple& o) const {
    return head == o.head && rel == o.rel && tail == o.tail;
  }
};

struct RelEmbedConfig {
  int k = 50;    // entity/relation embedding width
  int d_s = 64;  // sentence embedding width
  double gamma = 1.0;
  double lr = 0.01;
  double lambda = 0.5;  // context term weight; 0 disables the term
  int epochs = 500;
  int neg_per_pos = 1;
  int closure_cap = 1000;  // max added transitive-closure triples/relation
  int word_buckets = 1024;
  int bigram_buckets = 1024;
  uint64_t seed = 1;
};

// Deep averaging encoder: word and bigram bucket embeddings averaged, then
// two tanh layers. Buckets are FNV-hashed, so the encoder needs no fitted
// vocabulary. Parameters are public so tests can pin them.
class DanEncoder {
 public:
  DanEncoder() = default;
  DanEncoder(int d_s, int word_buckets, int bigram_buckets, uint64_t seed);

  int d_s() const { return static_cast<int>(W1.rows()); }

  // tanh(W2 tanh(W1 avg + b1) + b2); throws EmptySentence.
  Eigen::VectorXd embed(const std::vector<std::string>& tokens) const;

  Eigen::MatrixXd words, bigrams;  // buckets x d_s
  Eigen::MatrixXd W1, W2;          // d_s x d_s
  Eigen::VectorXd b1, b2;
};

struct SentenceEmbedding {
  Eigen::VectorXd vec;
  uint64_t source_hash = 0;
};

SentenceEmbedding dan_sentence_embed(const std::vector<std::string>& tokens,
                                     const DanEncoder& dan);

class TripleEmbeddingSpace {
 public:
  // Seeded-uniform initialized space over explicit entity/relation sets;
  // rows are L2-normalized like the training initializer.
  static TripleEmbeddingSpace make(std::vector<std::string> entities,
                                   std::vector<RelationDef> relations,
                                   const RelEmbedConfig& config);

  int k() const { return static_cast<int>(ent.cols()); }
  double lambda() const { return lambda_; }
  void set_lambda(double l) { lambda_ = l; }

  int entity_id(const std::string& name) const;    // -1 when unknown
  int relation_id(const std::string& name) const;  // -1 when unknown
  const std::vector<std::string>& entity_names() const { return ent_names_; }
  const std::vector<std::string>& relation_names() const { return rel_names_; }
  const std::vector<RelationDef>& relation_defs() const { return rel_defs_; }

  Eigen::MatrixXd ent;  // |E| x k, rows unit-L2 after every update
  Eigen::MatrixXd rel;  // |R| x k
  Eigen::MatrixXd P;    // k x d_s sentence-context projection
  DanEncoder dan;

  // ||h + r - t||_1; throws UnknownId / UnknownRelation.
  double energy(const Triple& triple) const;

  // energy + lambda * ||P s - r||_1 with s derived from triple.sentence;
  // throws MissingSentence when the triple has no sentence.
  double energy_with_context(const Triple& triple) const;
  double energy_with_context(const Triple& triple,
                             const SentenceEmbedding& s) const;

  // The score used by classification/ranking: context-augmented when the
  // triple carries a sentence and lambda > 0, plain otherwise.
  double score(const Triple& triple) const;

  // All relations ranked by ascending energy; ties break by relation
  // index. The sentence pointer may be null.
  std::vector<std::pair<std::string, double>> predict_relation(
      const std::string& head, const std::string& tail,
      const std::vector<std::string>* sentence) const;

  void save(const std::string& path) const;  // + .entities/.relations.tsv
  static TripleEmbeddingSpace load(const std::string& path);

 private:
  friend TripleEmbeddingSpace train_embeddings(const std::vector<Triple>&,
                                               const OntologySchema&,
                                               const RelEmbedConfig&);
  double lambda_ = 0.0;
  std::vector<std::string> ent_names_;
  std::vector<std::string> rel_names_;
  std::vector<RelationDef> rel_defs_;
  std::map<std::string, int> ent_index_;
  std::map<std::string, int> rel_index_;

  void rebuild_index();
};

// Margin-ranking SGD with uniform head/tail corruption, filtered against
// the training set. Entity rows are re-normalized to unit L2 after every
// update. Throws EmptyTriples / UnknownRelation.
TripleEmbeddingSpace train_embeddings(const std::vector<Triple>& triples,
                                      const OntologySchema& schema,
                                      const RelEmbedConfig& config);

// Per-relation energy thresholds maximizing validation accuracy.
std::map<std::string, double> fit_thresholds(
    const TripleEmbeddingSpace& space, const std::vector<Triple>& valid_pos,
    const std::vector<Triple>& valid_neg);

// true iff score(triple) <= thresholds[triple.rel]; throws UnknownRelation.
bool classify_triple(const Triple& triple, const TripleEmbeddingSpace& space,
                     const std::map<std::string, double>& thresholds);

// Triple TSV: head<TAB>relation<TAB>tail[<TAB>sentence-text].
std::vector<Triple> triples_from_tsv(std::string_view text);
std::string triples_to_tsv(const std::vector<Triple>& triples);

}  // namespace ontopop
