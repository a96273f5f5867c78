#include "ontopop/linkpred.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "ontopop/util.hpp"

namespace ontopop {

namespace {

uint64_t edge_key(int u, int v) {
  if (u > v) std::swap(u, v);
  return (static_cast<uint64_t>(static_cast<uint32_t>(u)) << 32) |
         static_cast<uint32_t>(v);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

int PersonGraph::add_node(const std::string& name) {
  names.push_back(name);
  return static_cast<int>(names.size()) - 1;
}

bool PersonGraph::add_edge(int u, int v, const std::string& relation) {
  if (u == v) return false;  // no self-loops
  if (u < 0 || v < 0 || u >= node_count() || v >= node_count())
    throw UnknownId("edge endpoint out of range");
  uint64_t key = edge_key(u, v);
  if (edge_keys_.count(key)) return false;
  edge_keys_.insert(key);
  if (u > v) std::swap(u, v);
  edges.emplace_back(u, v);
  edge_relations.push_back(relation);
  return true;
}

bool PersonGraph::has_edge(int u, int v) const {
  return edge_keys_.count(edge_key(u, v)) > 0;
}

std::vector<std::vector<int>> PersonGraph::adjacency(
    const std::vector<std::pair<int, int>>& edge_subset) const {
  std::vector<std::vector<int>> adj(node_count());
  for (auto [u, v] : edge_subset) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  return adj;
}

PersonGraph graph_from_edgelist_tsv(std::string_view text) {
  PersonGraph g;
  std::map<std::string, int> index;
  auto node = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int id = g.add_node(name);
    index[name] = id;
    return id;
  };
  int lineno = 0;
  for (const auto& line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = split_on(line, '\t');
    if (fields.size() < 3)
      throw ParseError("edge list line " + std::to_string(lineno) +
                       ": expected src<TAB>relation<TAB>dst");
    g.add_edge(node(trim(fields[0])), node(trim(fields[2])), trim(fields[1]));
  }
  return g;
}

EdgeSplit split_edges(const PersonGraph& graph, double train_frac,
                      double val_frac, uint64_t seed) {
  const int n = graph.node_count();
  const size_t m = graph.edges.size();
  Rng rng(derive_seed(seed, "edge-split"));

  std::vector<size_t> order(m);
  for (size_t i = 0; i < m; ++i) order[i] = i;
  rng.shuffle(order);

  size_t n_train = static_cast<size_t>(train_frac * static_cast<double>(m));
  size_t n_val = static_cast<size_t>(val_frac * static_cast<double>(m));
  if (n_train + n_val > m) throw ValidationError("split fractions exceed 1");

  EdgeSplit split;
  for (size_t i = 0; i < m; ++i) {
    auto e = graph.edges[order[i]];
    if (i < n_train)
      split.train_pos.push_back(e);
    else if (i < n_train + n_val)
      split.val_pos.push_back(e);
    else
      split.test_pos.push_back(e);
  }

  // Negatives: uniform non-edges, globally without replacement.
  std::unordered_set<uint64_t> used;
  auto sample_negatives = [&](size_t count,
                              std::vector<std::pair<int, int>>& out) {
    size_t attempts = 0;
    const size_t max_attempts = 10000 * (count + 1);
    while (out.size() < count) {
      if (++attempts > max_attempts)
        throw ValidationError(
            "cannot sample enough negative non-edges; graph too dense");
      int u = static_cast<int>(rng.uniform_int(n));
      int v = static_cast<int>(rng.uniform_int(n));
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (graph.has_edge(u, v)) continue;
      uint64_t key = edge_key(u, v);
      if (used.count(key)) continue;
      used.insert(key);
      out.emplace_back(u, v);
    }
  };
  sample_negatives(split.train_pos.size(), split.train_neg);
  sample_negatives(split.val_pos.size(), split.val_neg);
  sample_negatives(split.test_pos.size(), split.test_neg);
  return split;
}

Eigen::MatrixXd normalized_adjacency(
    int n, const std::vector<std::pair<int, int>>& edges) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);  // self-loops
  for (auto [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& norm_adj,
                          const Eigen::MatrixXd& H,
                          const Eigen::MatrixXd& W) {
  if (norm_adj.rows() != norm_adj.cols() || norm_adj.cols() != H.rows())
    throw ShapeMismatch("gcn_layer: adjacency vs feature rows");
  if (H.cols() != W.rows())
    throw ShapeMismatch("gcn_layer: feature width vs weight rows");
  return (norm_adj * H * W).cwiseMax(0.0);
}

AnchorSets sample_anchor_sets(int n, double c, uint64_t seed) {
  AnchorSets out;
  if (n <= 0) return out;
  double ln = std::log(std::max(2, n));
  int m = std::max(1, static_cast<int>(std::ceil(c * ln * ln)));
  int levels = std::max(1, static_cast<int>(std::ceil(std::log2(
                                std::max(2, n)))));
  Rng rng(derive_seed(seed, "anchor-sets"));
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < m; ++i) {
    int size = std::max(1, n >> ((i % levels) + 1));
    // Partial Fisher-Yates: first `size` entries become the sample.
    for (int j = 0; j < size; ++j) {
      int k = j + static_cast<int>(rng.uniform_int(n - j));
      std::swap(pool[j], pool[k]);
    }
    std::vector<int> s(pool.begin(), pool.begin() + size);
    std::sort(s.begin(), s.end());
    out.sets.push_back(std::move(s));
  }
  return out;
}

Eigen::MatrixXd pgnn_features(int n,
                              const std::vector<std::pair<int, int>>& edges,
                              const AnchorSets& anchors) {
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, anchors.count());
  std::vector<int> dist(n);
  std::deque<int> queue;
  for (int i = 0; i < anchors.count(); ++i) {
    // Multi-source BFS gives min distance to the anchor set.
    std::fill(dist.begin(), dist.end(), -1);
    queue.clear();
    for (int a : anchors.sets[i]) {
      if (a < 0 || a >= n || dist[a] == 0) continue;
      dist[a] = 0;
      queue.push_back(a);
    }
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[u]) {
        if (dist[v] >= 0) continue;
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
    for (int u = 0; u < n; ++u)
      if (dist[u] >= 0) out(u, i) = 1.0 / (dist[u] + 1.0);
    // unreachable stays 0
  }
  return out;
}

std::string_view link_model_name(LinkModelKind k) {
  return k == LinkModelKind::gcn ? "gcn" : "pgnn";
}

LinkModelKind link_model_from_name(std::string_view name) {
  if (name == "gcn") return LinkModelKind::gcn;
  if (name == "pgnn") return LinkModelKind::pgnn;
  throw ParseError("unknown link model: " + std::string(name));
}

double score_edge(int u, int v, const Eigen::MatrixXd& embeddings) {
  if (u < 0 || v < 0 || u >= embeddings.rows() || v >= embeddings.rows())
    throw UnknownNode("node id out of range for embedding table");
  return sigmoid(embeddings.row(u).dot(embeddings.row(v)));
}

double LinkPredictor::score(int u, int v) const {
  return score_edge(u, v, embeddings);
}

LinkTrainResult train_link_predictor(const PersonGraph& graph,
                                     const EdgeSplit& split,
                                     LinkModelKind kind,
                                     const LinkPredConfig& config) {
  if (split.train_pos.empty())
    throw EmptySplit("no training positives in edge split");
  if (split.train_neg.empty())
    throw EmptySplit("no training negatives in edge split");
  const int n = graph.node_count();

  // Encoder inputs see only training edges.
  Eigen::MatrixXd M;  // gcn propagation
  Eigen::MatrixXd X;  // raw inputs
  if (kind == LinkModelKind::gcn) {
    M = normalized_adjacency(n, split.train_pos);
    if (graph.features.cols() > 0)
      X = graph.features;
    else
      X = Eigen::MatrixXd::Ones(n, 1);
  } else {
    AnchorSets anchors =
        sample_anchor_sets(n, config.anchor_c, config.seed);
    Eigen::MatrixXd phi = pgnn_features(n, split.train_pos, anchors);
    if (graph.features.cols() > 0) {
      X.resize(n, phi.cols() + graph.features.cols());
      X << phi, graph.features;
    } else {
      X = phi;
    }
  }

  const int in_dim = static_cast<int>(X.cols());
  Rng rng(derive_seed(config.seed, "linkpred-init"));
  auto glorot = [&](Eigen::MatrixXd& w, int rows, int cols) {
    double bound = std::sqrt(6.0 / (rows + cols));
    w.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  };
  LinkPredictor model;
  model.kind = kind;
  glorot(model.W1, in_dim, config.hidden);
  glorot(model.W2, config.hidden, config.emb_dim);

  // Pre-propagated inputs for the gcn layers.
  Eigen::MatrixXd MX = kind == LinkModelKind::gcn ? (M * X).eval() : X;

  auto forward = [&](Eigen::MatrixXd& H1, Eigen::MatrixXd& Z) {
    H1 = (MX * model.W1).cwiseMax(0.0);
    if (kind == LinkModelKind::gcn)
      Z = M * H1 * model.W2;
    else
      Z = H1 * model.W2;
  };

  std::vector<std::pair<std::pair<int, int>, double>> batch;
  for (auto e : split.train_pos) batch.push_back({e, 1.0});
  for (auto e : split.train_neg) batch.push_back({e, 0.0});
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  const bool have_val = !split.val_pos.empty() && !split.val_neg.empty();
  LinkTrainResult result;
  Eigen::MatrixXd H1, Z;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    forward(H1, Z);

    Eigen::MatrixXd dZ = Eigen::MatrixXd::Zero(n, config.emb_dim);
    for (const auto& [e, y] : batch) {
      auto [u, v] = e;
      double p = sigmoid(Z.row(u).dot(Z.row(v)));
      double g = (p - y) * inv_b;
      dZ.row(u) += g * Z.row(v);
      dZ.row(v) += g * Z.row(u);
    }

    Eigen::MatrixXd dH1, dW2;
    if (kind == LinkModelKind::gcn) {
      Eigen::MatrixXd MH1 = M * H1;
      dW2 = MH1.transpose() * dZ;
      dH1 = M.transpose() * dZ * model.W2.transpose();
    } else {
      dW2 = H1.transpose() * dZ;
      dH1 = dZ * model.W2.transpose();
    }
    Eigen::MatrixXd dPre =
        ((H1.array() > 0.0).cast<double>() * dH1.array()).matrix();
    Eigen::MatrixXd dW1 = MX.transpose() * dPre;

    if (config.lr != 0.0) {
      model.W1 -= config.lr * dW1;
      model.W2 -= config.lr * dW2;
    }

    if (have_val && (epoch % 10 == 9 || epoch + 1 == config.epochs)) {
      forward(H1, Z);
      std::vector<double> scores;
      std::vector<int> labels;
      for (auto [u, v] : split.val_pos) {
        scores.push_back(sigmoid(Z.row(u).dot(Z.row(v))));
        labels.push_back(1);
      }
      for (auto [u, v] : split.val_neg) {
        scores.push_back(sigmoid(Z.row(u).dot(Z.row(v))));
        labels.push_back(0);
      }
      result.val_auc_trace.push_back(roc_auc(scores, labels));
    }
  }
  forward(H1, Z);
  model.embeddings = Z;
  result.model = std::move(model);
  return result;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw LengthMismatch("roc_auc: scores vs labels length");
  size_t pos = 0, neg = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw DegenerateLabels("roc_auc needs at least one of each class");

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups; ranks are 1-based half-integers, so the
  // U statistic is exact in double precision.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // (i+1 + j)/2
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  double u = rank_sum_pos -
             static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<PredictedEdge> augment_graph(const PersonGraph& graph,
                                         const LinkPredictor& model,
                                         double threshold) {
  std::vector<PredictedEdge> out;
  const int n = graph.node_count();
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (graph.has_edge(u, v)) continue;
      double s = model.score(u, v);
      if (s > threshold) out.push_back({u, v, s});
    }
  }
  std::sort(out.begin(), out.end(), [](const PredictedEdge& a,
                                       const PredictedEdge& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  return out;
}

}  // namespace ontopop
