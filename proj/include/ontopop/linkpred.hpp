#pragma once
// Link prediction over the person graph. Two encoders share a dot-product
// + sigmoid decoder: a two-layer graph-convolution baseline, and a
// position-aware model built on anchor-set distance features. Message
// passing and positional features only ever see training edges.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "ontopop/errors.hpp"

namespace ontopop {

struct PersonGraph {
  std::vector<std::string> names;           // node id = index
  std::vector<std::pair<int, int>> edges;   // undirected, stored u < v
  std::vector<std::string> edge_relations;  // parallel to edges, may be ""
  Eigen::MatrixXd features;                 // optional; 0 cols = default

  int add_node(const std::string& name);
  // Deduplicates under (u,v) == (v,u); self-loops are rejected.
  bool add_edge(int u, int v, const std::string& relation = "");
  bool has_edge(int u, int v) const;
  int node_count() const { return static_cast<int>(names.size()); }

  std::vector<std::vector<int>> adjacency(
      const std::vector<std::pair<int, int>>& edge_subset) const;

 private:
  std::unordered_set<uint64_t> edge_keys_;
};

// Edge-list TSV: src<TAB>relation<TAB>dst (node names).
PersonGraph graph_from_edgelist_tsv(std::string_view text);

struct EdgeSplit {
  std::vector<std::pair<int, int>> train_pos, val_pos, test_pos;
  std::vector<std::pair<int, int>> train_neg, val_neg, test_neg;
};

// Shuffled edge split with per-split uniform negative non-edges, sampled
// without replacement and excluded from the full edge set. Negative counts
// match the positive counts per split.
EdgeSplit split_edges(const PersonGraph& graph, double train_frac,
                      double val_frac, uint64_t seed);

// relu(D^-1/2 (A+I) D^-1/2 H W); throws ShapeMismatch.
Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& norm_adj,
                          const Eigen::MatrixXd& H, const Eigen::MatrixXd& W);

// Dense symmetric-normalized adjacency with self-loops.
Eigen::MatrixXd normalized_adjacency(
    int n, const std::vector<std::pair<int, int>>& edges);

struct AnchorSets {
  std::vector<std::vector<int>> sets;
  int count() const { return static_cast<int>(sets.size()); }
};

// m = ceil(c * ln^2 n) anchor sets with exponentially distributed sizes
// (Bourgain-style), sampled without replacement under the given seed.
AnchorSets sample_anchor_sets(int n, double c, uint64_t seed);

// Feature (u, i) = max over a in S_i of 1 / (d(u, a) + 1), BFS distance
// over the given edges; unreachable contributes 0.
Eigen::MatrixXd pgnn_features(int n,
                              const std::vector<std::pair<int, int>>& edges,
                              const AnchorSets& anchors);

enum class LinkModelKind { gcn, pgnn };
std::string_view link_model_name(LinkModelKind k);
LinkModelKind link_model_from_name(std::string_view name);

struct LinkPredConfig {
  int hidden = 32;
  int emb_dim = 32;
  double lr = 0.05;
  int epochs = 200;
  double anchor_c = 1.0;
  uint64_t seed = 1;
};

struct LinkPredictor {
  LinkModelKind kind = LinkModelKind::gcn;
  Eigen::MatrixXd W1, W2;
  Eigen::MatrixXd embeddings;  // n x emb_dim, for the trained graph

  // sigmoid(z_u . z_v); throws UnknownNode.
  double score(int u, int v) const;
};

// sigmoid of the inner product of two node embeddings.
double score_edge(int u, int v, const Eigen::MatrixXd& embeddings);

struct LinkTrainResult {
  LinkPredictor model;
  std::vector<double> val_auc_trace;  // one point per 10 epochs when a
                                      // validation split exists
};

// Full-batch gradient descent on BCE over train positives + negatives.
// Deterministic under seed. Throws EmptySplit.
LinkTrainResult train_link_predictor(const PersonGraph& graph,
                                     const EdgeSplit& split,
                                     LinkModelKind kind,
                                     const LinkPredConfig& config);

// Rank-based ROC AUC with ties counted 0.5 (normalized Mann-Whitney U).
// Throws DegenerateLabels unless both classes are present.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct PredictedEdge {
  int u, v;
  double score;
};

// Non-edges scoring above threshold, descending; never returns an
// existing edge.
std::vector<PredictedEdge> augment_graph(const PersonGraph& graph,
                                         const LinkPredictor& model,
                                         double threshold);

}  // namespace ontopop
