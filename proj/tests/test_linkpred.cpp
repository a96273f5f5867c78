#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ontopop/linkpred.hpp"
#include "ontopop/util.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ontopop;
using namespace ontopop::testsupport;

TEST_CASE("gcn_layer: isolated node with identity weights is relu") {
  Eigen::MatrixXd M = normalized_adjacency(1, {});
  CHECK(M(0, 0) == doctest::Approx(1.0));
  Eigen::MatrixXd H(1, 2);
  H << -3.0, 2.0;
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd out = gcn_layer(M, H, W);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 2.0);
}

TEST_CASE("gcn_layer: two connected nodes with equal features stay equal") {
  Eigen::MatrixXd M = normalized_adjacency(2, {{0, 1}});
  Eigen::MatrixXd H(2, 3);
  H << 1, 2, 3, 1, 2, 3;
  Eigen::MatrixXd W = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd out = gcn_layer(M, H, W);
  CHECK((out.row(0) - out.row(1)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("gcn_layer matches a naive dense computation on a 3-node path") {
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}};
  Eigen::MatrixXd H(3, 2);
  H << 1, 0, 0, 1, 1, 1;
  Eigen::MatrixXd W(2, 2);
  W << 0.5, -1.0, 2.0, 0.25;

  // Independent oracle: build A+I, D, and the product with plain loops.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 3; ++i) a(i, i) = 1.0;
  for (auto [u, v] : edges) a(u, v) = a(v, u) = 1.0;
  Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::MatrixXd m(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m(i, j) = a(i, j) / std::sqrt(deg(i) * deg(j));
  Eigen::MatrixXd expected = (m * H * W).cwiseMax(0.0);

  Eigen::MatrixXd got = gcn_layer(normalized_adjacency(3, edges), H, W);
  CHECK((got - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("gcn_layer validates shapes") {
  Eigen::MatrixXd M = normalized_adjacency(2, {{0, 1}});
  CHECK_THROWS_AS(
      gcn_layer(M, Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 2)),
      ShapeMismatch);
  CHECK_THROWS_AS(
      gcn_layer(M, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2)),
      ShapeMismatch);
}

TEST_CASE("gcn_layer commutes with node relabeling") {
  Rng rng(7);
  const int n = 6;
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3},
                                            {3, 4}, {4, 5}, {0, 5}, {1, 4}};
  Eigen::MatrixXd H(n, 3), W(3, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) H(i, j) = rng.uniform(-1, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) W(i, j) = rng.uniform(-1, 1);

  // permutation: rotate ids by 2
  auto perm = [n](int i) { return (i + 2) % n; };
  std::vector<std::pair<int, int>> pedges;
  for (auto [u, v] : edges) pedges.emplace_back(perm(u), perm(v));
  Eigen::MatrixXd PH(n, 3);
  for (int i = 0; i < n; ++i) PH.row(perm(i)) = H.row(i);

  Eigen::MatrixXd out = gcn_layer(normalized_adjacency(n, edges), H, W);
  Eigen::MatrixXd pout = gcn_layer(normalized_adjacency(n, pedges), PH, W);
  for (int i = 0; i < n; ++i)
    CHECK((pout.row(perm(i)) - out.row(i)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("pgnn features: anchor membership, path distances, disconnection") {
  AnchorSets anchors;
  anchors.sets = {{0}};
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}};
  Eigen::MatrixXd phi = pgnn_features(4, edges, anchors);  // node 3 isolated
  CHECK(phi(0, 0) == doctest::Approx(1.0));        // in the anchor set
  CHECK(phi(1, 0) == doctest::Approx(0.5));        // BFS distance 1
  CHECK(phi(2, 0) == doctest::Approx(1.0 / 3.0));  // BFS distance 2
  CHECK(phi(3, 0) == 0.0);                         // unreachable

  // components live in [0,1]; exactly 1 iff the node is in the set
  for (int u = 0; u < 4; ++u) {
    CHECK(phi(u, 0) >= 0.0);
    CHECK(phi(u, 0) <= 1.0);
    CHECK((phi(u, 0) == 1.0) == (u == 0));
  }
}

TEST_CASE("anchor set sampling: count, validity, determinism") {
  const int n = 100;
  AnchorSets a = sample_anchor_sets(n, 1.0, 5);
  double ln = std::log(static_cast<double>(n));
  CHECK(a.count() == static_cast<int>(std::ceil(ln * ln)));
  for (const auto& s : a.sets) {
    CHECK(!s.empty());
    for (int x : s) {
      CHECK(x >= 0);
      CHECK(x < n);
    }
  }
  AnchorSets b = sample_anchor_sets(n, 1.0, 5);
  REQUIRE(a.sets.size() == b.sets.size());
  for (size_t i = 0; i < a.sets.size(); ++i) CHECK(a.sets[i] == b.sets[i]);
}

TEST_CASE("score_edge: sigmoid of the inner product") {
  Eigen::MatrixXd z(3, 2);
  z << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5;
  CHECK(score_edge(0, 1, z) == 0.5);  // orthogonal embeddings

  // z_u = z_v with squared norm ln 3 -> sigmoid(ln 3) = 3/4
  double c = std::sqrt(std::log(3.0) / 2.0);
  Eigen::MatrixXd z2(2, 2);
  z2 << c, c, c, c;
  CHECK(score_edge(0, 1, z2) == doctest::Approx(0.75).epsilon(1e-12));

  // random pair matches an independent dot-product oracle
  Rng rng(3);
  Eigen::MatrixXd z3(2, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) z3(i, j) = rng.uniform(-2, 2);
  double dot = 0;
  for (int j = 0; j < 4; ++j) dot += z3(0, j) * z3(1, j);
  CHECK(score_edge(0, 1, z3) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-dot))).epsilon(1e-12));

  CHECK_THROWS_AS(score_edge(0, 5, z), UnknownNode);
}

TEST_CASE("edge split: disjoint positives, matched filtered negatives") {
  PersonGraph g = make_position_graph(60, 0.25, 9);
  REQUIRE(g.edges.size() >= 20);
  EdgeSplit split = split_edges(g, 0.8, 0.1, 42);

  CHECK(split.train_pos.size() + split.val_pos.size() +
            split.test_pos.size() ==
        g.edges.size());
  CHECK(split.test_neg.size() == split.test_pos.size());
  CHECK(split.val_neg.size() == split.val_pos.size());
  CHECK(split.train_neg.size() == split.train_pos.size());

  auto key = [](std::pair<int, int> e) {
    return static_cast<uint64_t>(e.first) << 32 |
           static_cast<uint32_t>(e.second);
  };
  std::set<uint64_t> seen;
  for (const auto* part : {&split.train_pos, &split.val_pos, &split.test_pos})
    for (auto e : *part) CHECK(seen.insert(key(e)).second);
  for (const auto* part : {&split.train_neg, &split.val_neg, &split.test_neg})
    for (auto e : *part) {
      CHECK_FALSE(g.has_edge(e.first, e.second));
      CHECK(seen.insert(key(e)).second);  // sampled without replacement
    }
}

TEST_CASE("training separates two cliques") {
  // Two K5 cliques with one-hot features; cross-clique pairs are the
  // negatives, so a community-separable embedding reaches high train AUC.
  PersonGraph g;
  for (int i = 0; i < 10; ++i) g.add_node("n" + std::to_string(i));
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b) {
      g.add_edge(a, b);
      g.add_edge(5 + a, 5 + b);
    }
  g.features = Eigen::MatrixXd::Identity(10, 10);

  EdgeSplit split;
  split.train_pos = g.edges;
  for (int a = 0; a < 5; ++a)
    for (int b = 5; b < 10; ++b)
      if (split.train_neg.size() < split.train_pos.size())
        split.train_neg.emplace_back(a, b);

  LinkPredConfig cfg;
  cfg.epochs = 200;
  cfg.lr = 0.1;
  cfg.seed = 4;
  LinkTrainResult res =
      train_link_predictor(g, split, LinkModelKind::gcn, cfg);

  std::vector<double> scores;
  std::vector<int> labels;
  for (auto [u, v] : split.train_pos) {
    scores.push_back(res.model.score(u, v));
    labels.push_back(1);
  }
  for (auto [u, v] : split.train_neg) {
    scores.push_back(res.model.score(u, v));
    labels.push_back(0);
  }
  CHECK(roc_auc(scores, labels) > 0.9);
}

TEST_CASE("lr 0 leaves the predictor at its initialization") {
  PersonGraph g = make_position_graph(30, 0.3, 2);
  EdgeSplit split = split_edges(g, 0.9, 0.0, 8);
  LinkPredConfig cfg;
  cfg.seed = 6;
  cfg.epochs = 0;
  LinkPredictor init =
      train_link_predictor(g, split, LinkModelKind::pgnn, cfg).model;
  cfg.epochs = 40;
  cfg.lr = 0.0;
  LinkPredictor frozen =
      train_link_predictor(g, split, LinkModelKind::pgnn, cfg).model;
  CHECK((init.W1 - frozen.W1).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((init.W2 - frozen.W2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("same seed, same validation AUC trace") {
  PersonGraph g = make_position_graph(50, 0.25, 14);
  EdgeSplit split = split_edges(g, 0.8, 0.1, 15);
  LinkPredConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 16;
  auto a = train_link_predictor(g, split, LinkModelKind::gcn, cfg);
  auto b = train_link_predictor(g, split, LinkModelKind::gcn, cfg);
  REQUIRE(!a.val_auc_trace.empty());
  REQUIRE(a.val_auc_trace.size() == b.val_auc_trace.size());
  for (size_t i = 0; i < a.val_auc_trace.size(); ++i)
    CHECK(a.val_auc_trace[i] == b.val_auc_trace[i]);
}

TEST_CASE("train_link_predictor rejects empty splits") {
  PersonGraph g = make_position_graph(10, 0.3, 1);
  EdgeSplit empty;
  CHECK_THROWS_AS(
      train_link_predictor(g, empty, LinkModelKind::gcn, LinkPredConfig{}),
      EmptySplit);
}

TEST_CASE("roc_auc: frozen examples") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  // brute-force pair counting: 4 pairs, 3 concordant -> 0.75
  CHECK(roc_auc({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == 0.75);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), DegenerateLabels);
  CHECK_THROWS_AS(roc_auc({0.1}, {1, 0}), LengthMismatch);
}

TEST_CASE("roc_auc equals the pair-counting oracle on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    size_t n = 2 + rng.uniform_int(20);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      scores[i] = static_cast<double>(rng.uniform_int(5)) / 4.0;
      labels[i] = static_cast<int>(rng.uniform_int(2));
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(roc_auc(scores, labels) == brute_force_auc(scores, labels));
  }
}

TEST_CASE("roc_auc is invariant under strictly monotone transforms") {
  Rng rng(78);
  std::vector<double> scores(30);
  std::vector<int> labels(30);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform(-3, 3);
    labels[i] = static_cast<int>(rng.uniform_int(2));
  }
  labels[0] = 1;
  labels[1] = 0;
  double base = roc_auc(scores, labels);
  auto transformed = scores;
  for (double& s : transformed) s = std::exp(0.5 * s) + 7.0;
  CHECK(roc_auc(transformed, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("a random scorer sits at AUC 0.5") {
  Rng rng(79);
  const size_t n_pos = 50, n_neg = 50;
  std::vector<int> labels;
  for (size_t i = 0; i < n_pos; ++i) labels.push_back(1);
  for (size_t i = 0; i < n_neg; ++i) labels.push_back(0);
  double mean = 0;
  const int resamples = 1000;
  for (int r = 0; r < resamples; ++r) {
    std::vector<double> scores;
    for (size_t i = 0; i < labels.size(); ++i) scores.push_back(rng.uniform());
    mean += roc_auc(scores, labels);
  }
  mean /= resamples;
  CHECK(mean > 0.45);
  CHECK(mean < 0.55);
}

TEST_CASE("augment_graph: threshold edge cases and exhaustive agreement") {
  PersonGraph g;
  for (int i = 0; i < 4; ++i) g.add_node("n" + std::to_string(i));
  g.add_edge(0, 1);
  g.add_edge(2, 3);

  LinkPredictor model;
  model.kind = LinkModelKind::gcn;
  Rng rng(12);
  model.embeddings.resize(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) model.embeddings(i, j) = rng.uniform(-1, 1);

  CHECK(augment_graph(g, model, 1.0).empty());  // sigmoid < 1 always

  auto all = augment_graph(g, model, 0.0);
  CHECK(all.size() == 4 * 3 / 2 - 2);  // n(n-1)/2 - |E|

  // exhaustive scorer agreement
  std::set<std::pair<int, int>> expected;
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v)
      if (!g.has_edge(u, v) && model.score(u, v) > 0.25)
        expected.insert({u, v});
  std::set<std::pair<int, int>> got;
  for (const auto& pe : augment_graph(g, model, 0.25))
    got.insert({pe.u, pe.v});
  CHECK(got == expected);

  // never returns an existing edge, sorted by score descending
  auto preds = augment_graph(g, model, 0.0);
  for (size_t i = 0; i < preds.size(); ++i) {
    CHECK_FALSE(g.has_edge(preds[i].u, preds[i].v));
    if (i > 0) CHECK(preds[i - 1].score >= preds[i].score);
  }
}

TEST_CASE("edge-list TSV parsing deduplicates and canonicalizes") {
  PersonGraph g = graph_from_edgelist_tsv(
      "ann\tspouse_of\tbob\n"
      "bob\tspouse_of\tann\n"
      "ann\tcolleague_of\tcarol\n");
  CHECK(g.node_count() == 3);
  CHECK(g.edges.size() == 2);  // reversed duplicate collapses
  CHECK(g.has_edge(0, 1));
  CHECK_THROWS_AS(graph_from_edgelist_tsv("one_field\n"), ParseError);
}
