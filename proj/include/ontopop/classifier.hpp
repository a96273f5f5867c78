#pragma once
// Neural fine-grained entity classification: a mention encoder (word-vector
// average), a choice of context encoders (averaging / RNN / attentive
// bi-RNN), token-feature augmentation, a sigmoid multi-label head trained
// with binary cross entropy, and macro/micro F1 evaluation.
//
// Token inputs optionally carry light-weight features: the token's shape
// tag plus a coarse annotator tag ("NONE" when absent). Each token's input
// vector is its word embedding concatenated with the mean of its feature
// embeddings.
//
// All math is plain dense Eigen; gradients are hand-derived and checked
// against finite differences in the test suite.

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ontopop/errors.hpp"
#include "ontopop/ingest.hpp"
#include "ontopop/schema.hpp"

namespace ontopop {

enum class EncoderKind { averaging, rnn, attentive };
std::string_view encoder_name(EncoderKind k);
EncoderKind encoder_from_name(std::string_view name);

struct ClassifierConfig {
  int d_w = 50;  // word embedding width
  int d_f = 10;  // feature embedding width
  int D = 100;   // per-representation width; requires d_w (+ d_f) <= D
  EncoderKind encoder = EncoderKind::averaging;
  int hidden = 50;         // bi-RNN cell width (attentive encoder)
  int attention_dim = 20;  // attention MLP width
  int window = 10;         // context window W, tokens per side
  bool use_features = true;
  double lr = 0.1;
  int batch_size = 32;
  int epochs = 5;
  uint64_t seed = 1;
  std::string pretrained_embeddings_path;  // optional text-format import
};

// Context windows are stored nearest-first away from the mention; encoders
// consume them in stored order.
struct MentionContext {
  std::vector<std::string> left;
  std::vector<std::string> mention;
  std::vector<std::string> right;
  // Coarse annotator tag per token across left+mention+right, "NONE" when
  // absent. May be left empty, which means all NONE.
  std::vector<std::string> features;
};

struct TrainingExample {
  MentionContext ctx;
  std::set<TypePath> labels;  // ancestor-closed, non-empty
};

struct RnnCellParams {
  Eigen::MatrixXd Wx, Wh, b;  // b stored as a column
};

struct AttentiveParams {
  RnnCellParams fwd, bwd;
  Eigen::MatrixXd Wa, wa, P;  // wa stored as a column
};

struct ModelParams {
  Eigen::MatrixXd E;   // |V| x d_w word embeddings
  Eigen::MatrixXd F;   // |F| x d_f feature embeddings
  Eigen::MatrixXd Wy;  // K x 3D projection
  RnnCellParams rnn_left, rnn_right;
  AttentiveParams att_left, att_right;

  // Visits every allocated parameter matrix with a stable name, in a fixed
  // order (initialization and SGD pairing rely on it).
  template <class Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

 private:
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    auto emit = [&](const std::string& name, auto& m) {
      if (m.size() > 0) fn(name, m);
    };
    emit("E", self.E);
    emit("F", self.F);
    emit("Wy", self.Wy);
    emit("rnn_left.Wx", self.rnn_left.Wx);
    emit("rnn_left.Wh", self.rnn_left.Wh);
    emit("rnn_left.b", self.rnn_left.b);
    emit("rnn_right.Wx", self.rnn_right.Wx);
    emit("rnn_right.Wh", self.rnn_right.Wh);
    emit("rnn_right.b", self.rnn_right.b);
    auto emit_att = [&](const std::string& p, auto& att) {
      emit(p + "fwd.Wx", att.fwd.Wx);
      emit(p + "fwd.Wh", att.fwd.Wh);
      emit(p + "fwd.b", att.fwd.b);
      emit(p + "bwd.Wx", att.bwd.Wx);
      emit(p + "bwd.Wh", att.bwd.Wh);
      emit(p + "bwd.b", att.bwd.b);
      emit(p + "Wa", att.Wa);
      emit(p + "wa", att.wa);
      emit(p + "P", att.P);
    };
    emit_att("att_left.", self.att_left);
    emit_att("att_right.", self.att_right);
  }
};

enum class Side { left, right };

class ClassifierModel {
 public:
  ClassifierModel() = default;
  // Allocates and seeds all parameters with uniform(-0.05, 0.05).
  ClassifierModel(ClassifierConfig config, std::vector<std::string> vocab,
                  std::vector<std::string> feature_vocab,
                  std::vector<TypePath> labels);

  const ClassifierConfig& config() const { return config_; }
  const std::vector<TypePath>& labels() const { return labels_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::string>& feature_vocab() const {
    return feature_vocab_;
  }
  int word_index(const std::string& token) const;     // falls back to <unk>
  int feature_index(const std::string& tag) const;    // falls back to NONE

  ModelParams params;  // open for tests and hand-set configurations

  // Encoders. Context encoders return the zero vector for empty input;
  // encode_mention throws EmptyMention.
  Eigen::VectorXd encode_mention(const std::vector<std::string>& tokens,
                                 const std::vector<std::string>& tags) const;
  Eigen::VectorXd encode_context_avg(
      const std::vector<std::string>& tokens,
      const std::vector<std::string>& tags) const;
  Eigen::VectorXd encode_context_rnn(
      Side side, const std::vector<std::string>& tokens,
      const std::vector<std::string>& tags) const;
  Eigen::VectorXd encode_context_attentive(
      Side side, const std::vector<std::string>& tokens,
      const std::vector<std::string>& tags) const;
  Eigen::VectorXd encode_context(Side side,
                                 const std::vector<std::string>& tokens,
                                 const std::vector<std::string>& tags) const;

  // Raw bi-RNN states of the attentive encoder, one column per token.
  Eigen::MatrixXd birnn_states(Side side,
                               const std::vector<std::string>& tokens,
                               const std::vector<std::string>& tags) const;

  // y = sigmoid(Wy [v_left, v_right, v_entity]).
  Eigen::VectorXd classify(const MentionContext& ctx) const;

  // Loss of one example; gradients accumulate into `grads` (same shapes as
  // params, zero-initialized by make_gradients).
  double loss(const TrainingExample& ex) const;
  double loss_and_grad(const TrainingExample& ex, ModelParams& grads) const;
  ModelParams make_gradients() const;

  std::set<TypePath> decode(const Eigen::VectorXd& y,
                            const OntologySchema& schema,
                            double threshold = 0.5) const;

  void save(const std::string& path) const;
  static ClassifierModel load(const std::string& path);

 private:
  ClassifierConfig config_;
  std::vector<std::string> vocab_;
  std::vector<std::string> feature_vocab_;
  std::vector<TypePath> labels_;
  std::unordered_map<std::string, int> word_index_;
  std::unordered_map<std::string, int> feature_index_;
  int unk_index_ = 0;
  int none_feature_index_ = 0;

  friend struct ClassifierForward;
};

// y = sigmoid(Wy v); throws DimensionMismatch when v is not 3D wide.
Eigen::VectorXd classify_head(const Eigen::VectorXd& v,
                              const Eigen::MatrixXd& Wy);

// Sum_k -t log y - (1-t) log(1-y), with y clamped to [1e-7, 1-1e-7].
double bce_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& t);

// Labels above threshold, plus the argmax label (lowest index wins ties),
// ancestor-closed. Always non-empty.
std::set<TypePath> decode_labels(const Eigen::VectorXd& y,
                                 const std::vector<TypePath>& labels,
                                 const OntologySchema& schema,
                                 double threshold = 0.5);

struct EvalResult {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

// Macro F1 = mean of per-mention set F1; micro F1 from pooled counts.
// Throws LengthMismatch when the two lists differ in length.
EvalResult evaluate(const std::vector<std::set<TypePath>>& predictions,
                    const std::vector<std::set<TypePath>>& gold);

struct TrainResult {
  ClassifierModel model;
  std::vector<double> epoch_loss;  // mean per-example loss per epoch
};

// Mini-batch SGD over the full parameter set. Vocabulary, feature tags and
// the label order are derived from the training data deterministically.
// Throws EmptyDataset.
TrainResult train_classifier(const std::vector<TrainingExample>& examples,
                             const OntologySchema& schema,
                             const ClassifierConfig& config);

// Builds a context window around a mention. per_token_tags is aligned with
// sentence tokens (may be empty = all NONE).
MentionContext make_context(const Sentence& sentence, size_t first_tok,
                            size_t last_tok, int window,
                            const std::vector<std::string>& per_token_tags);

// Training data interchange: one JSON object per line with fields
// {left, mention, right, features, labels}.
std::vector<TrainingExample> examples_from_jsonl(std::string_view text,
                                                 const OntologySchema& schema);
std::string examples_to_jsonl(const std::vector<TrainingExample>& examples);

// Embedding import, text format: first line "|V| d_w", then one token and
// d_w values per line.
std::pair<std::vector<std::string>, Eigen::MatrixXd> parse_embedding_text(
    std::string_view text);

}  // namespace ontopop
