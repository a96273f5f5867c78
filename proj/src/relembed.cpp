#include "ontopop/relembed.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "ontopop/ingest.hpp"
#include "ontopop/util.hpp"

namespace ontopop {

// ---------------------------------------------------------------------------
// DAN sentence encoder
// ---------------------------------------------------------------------------

DanEncoder::DanEncoder(int d_s, int word_buckets, int bigram_buckets,
                       uint64_t seed) {
  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& m, int rows, int cols, double scale) {
    m.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  };
  // O(1)-magnitude outputs from a fixed random featurizer.
  fill(words, word_buckets, d_s, 0.5);
  fill(bigrams, bigram_buckets, d_s, 0.5);
  fill(W1, d_s, d_s, 0.5);
  fill(W2, d_s, d_s, 0.5);
  b1 = Eigen::VectorXd::Zero(d_s);
  b2 = Eigen::VectorXd::Zero(d_s);
}

Eigen::VectorXd DanEncoder::embed(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw EmptySentence("cannot embed an empty sentence");
  const int d = d_s();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  size_t count = 0;
  for (const auto& tok : tokens) {
    size_t b = fnv1a64(tok) % static_cast<uint64_t>(words.rows());
    sum += words.row(static_cast<int>(b)).transpose();
    ++count;
  }
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    std::string key = tokens[i] + '\x1f' + tokens[i + 1];
    size_t b = fnv1a64(key) % static_cast<uint64_t>(bigrams.rows());
    sum += bigrams.row(static_cast<int>(b)).transpose();
    ++count;
  }
  Eigen::VectorXd avg = sum / static_cast<double>(count);
  Eigen::VectorXd hidden = (W1 * avg + b1).array().tanh();
  return ((W2 * hidden + b2).array().tanh()).matrix();
}

SentenceEmbedding dan_sentence_embed(const std::vector<std::string>& tokens,
                                     const DanEncoder& dan) {
  SentenceEmbedding out;
  out.vec = dan.embed(tokens);
  std::string joined;
  for (const auto& t : tokens) {
    joined += t;
    joined.push_back('\x1f');
  }
  out.source_hash = fnv1a64(joined);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding space
// ---------------------------------------------------------------------------

void TripleEmbeddingSpace::rebuild_index() {
  ent_index_.clear();
  rel_index_.clear();
  for (size_t i = 0; i < ent_names_.size(); ++i)
    ent_index_[ent_names_[i]] = static_cast<int>(i);
  for (size_t i = 0; i < rel_names_.size(); ++i)
    rel_index_[rel_names_[i]] = static_cast<int>(i);
}

int TripleEmbeddingSpace::entity_id(const std::string& name) const {
  auto it = ent_index_.find(name);
  return it == ent_index_.end() ? -1 : it->second;
}

int TripleEmbeddingSpace::relation_id(const std::string& name) const {
  auto it = rel_index_.find(name);
  return it == rel_index_.end() ? -1 : it->second;
}

namespace {

double l1_norm(const Eigen::VectorXd& v) { return v.array().abs().sum(); }

}  // namespace

double TripleEmbeddingSpace::energy(const Triple& triple) const {
  int h = entity_id(triple.head);
  int t = entity_id(triple.tail);
  if (h < 0) throw UnknownId("unknown entity: " + triple.head);
  if (t < 0) throw UnknownId("unknown entity: " + triple.tail);
  int r = relation_id(triple.rel);
  if (r < 0) throw UnknownRelation("unknown relation: " + triple.rel);
  return l1_norm(ent.row(h) + rel.row(r) - ent.row(t));
}

double TripleEmbeddingSpace::energy_with_context(
    const Triple& triple, const SentenceEmbedding& s) const {
  double base = energy(triple);
  int r = relation_id(triple.rel);
  return base +
         lambda_ * l1_norm(P * s.vec - rel.row(r).transpose());
}

double TripleEmbeddingSpace::energy_with_context(const Triple& triple) const {
  if (!triple.has_sentence())
    throw MissingSentence("triple carries no sentence context");
  return energy_with_context(triple, dan_sentence_embed(triple.sentence, dan));
}

double TripleEmbeddingSpace::score(const Triple& triple) const {
  if (triple.has_sentence() && lambda_ > 0.0)
    return energy_with_context(triple);
  return energy(triple);
}

std::vector<std::pair<std::string, double>>
TripleEmbeddingSpace::predict_relation(
    const std::string& head, const std::string& tail,
    const std::vector<std::string>* sentence) const {
  int h = entity_id(head);
  int t = entity_id(tail);
  if (h < 0) throw UnknownId("unknown entity: " + head);
  if (t < 0) throw UnknownId("unknown entity: " + tail);

  std::optional<Eigen::VectorXd> projected;
  if (sentence != nullptr && !sentence->empty() && lambda_ > 0.0)
    projected = P * dan_sentence_embed(*sentence, dan).vec;

  std::vector<std::pair<std::string, double>> out;
  std::vector<int> order;
  std::vector<double> energies(rel_names_.size());
  for (size_t r = 0; r < rel_names_.size(); ++r) {
    double f =
        l1_norm(ent.row(h) + rel.row(static_cast<int>(r)) - ent.row(t));
    if (projected)
      f += lambda_ *
           l1_norm(*projected - rel.row(static_cast<int>(r)).transpose());
    energies[r] = f;
    order.push_back(static_cast<int>(r));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return energies[a] < energies[b];  // stable: ties keep index order
  });
  for (int r : order) out.emplace_back(rel_names_[r], energies[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct TripleKey {
  int h, r, t;
  bool operator==(const TripleKey& o) const {
    return h == o.h && r == o.r && t == o.t;
  }
};

struct TripleKeyHash {
  size_t operator()(const TripleKey& k) const {
    uint64_t x = (static_cast<uint64_t>(k.h) << 40) ^
                 (static_cast<uint64_t>(k.r) << 20) ^
                 static_cast<uint64_t>(k.t);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<size_t>(x);
  }
};

void normalize_row(Eigen::MatrixXd& m, int row) {
  double n = m.row(row).norm();
  if (n > 0) m.row(row) /= n;
}

Eigen::VectorXd sign_vec(const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i)
    out(i) = v(i) > 0 ? 1.0 : (v(i) < 0 ? -1.0 : 0.0);
  return out;
}

}  // namespace

TripleEmbeddingSpace TripleEmbeddingSpace::make(
    std::vector<std::string> entities, std::vector<RelationDef> relations,
    const RelEmbedConfig& config) {
  TripleEmbeddingSpace space;
  space.lambda_ = config.lambda;
  space.ent_names_ = std::move(entities);
  for (auto& r : relations) {
    space.rel_names_.push_back(r.name);
    space.rel_defs_.push_back(std::move(r));
  }
  space.rebuild_index();

  const int k = config.k;
  const int ne = static_cast<int>(space.ent_names_.size());
  const int nr = static_cast<int>(space.rel_names_.size());

  Rng rng(derive_seed(config.seed, "relembed-train"));
  const double bound = 6.0 / std::sqrt(static_cast<double>(k));
  space.ent.resize(ne, k);
  space.rel.resize(nr, k);
  for (int i = 0; i < ne; ++i)
    for (int c = 0; c < k; ++c) space.ent(i, c) = rng.uniform(-bound, bound);
  for (int i = 0; i < nr; ++i)
    for (int c = 0; c < k; ++c) space.rel(i, c) = rng.uniform(-bound, bound);
  for (int i = 0; i < ne; ++i) normalize_row(space.ent, i);
  for (int i = 0; i < nr; ++i) normalize_row(space.rel, i);
  space.P.resize(k, config.d_s);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < config.d_s; ++c)
      space.P(r, c) = rng.uniform(-bound, bound);
  space.dan = DanEncoder(config.d_s, config.word_buckets,
                         config.bigram_buckets,
                         derive_seed(config.seed, "relembed-dan"));
  return space;
}

TripleEmbeddingSpace train_embeddings(const std::vector<Triple>& triples,
                                      const OntologySchema& schema,
                                      const RelEmbedConfig& config) {
  if (triples.empty()) throw EmptyTriples("no training triples");

  // Relations follow schema declaration order; entities sorted by name so
  // the space is independent of triple ordering.
  std::set<std::string> names;
  for (const auto& t : triples) {
    if (schema.find_relation(t.rel) == nullptr)
      throw UnknownRelation("triple relation not in schema: " + t.rel);
    names.insert(t.head);
    names.insert(t.tail);
  }
  TripleEmbeddingSpace space = TripleEmbeddingSpace::make(
      {names.begin(), names.end()}, schema.relations(), config);

  const int ne = static_cast<int>(space.ent_names_.size());
  const int nr = static_cast<int>(space.rel_names_.size());
  Rng rng(derive_seed(config.seed, "relembed-sgd"));

  // Index the training triples; augment per relation properties.
  struct IndexedTriple {
    TripleKey key;
    const std::vector<std::string>* sentence;  // may be null
  };
  std::vector<IndexedTriple> train;
  std::unordered_set<TripleKey, TripleKeyHash> known;
  auto push = [&](int h, int r, int t, const std::vector<std::string>* sent) {
    TripleKey key{h, r, t};
    if (known.count(key)) return;
    known.insert(key);
    train.push_back({key, sent});
  };
  for (const auto& t : triples) {
    push(space.entity_id(t.head), space.relation_id(t.rel),
         space.entity_id(t.tail), t.has_sentence() ? &t.sentence : nullptr);
  }
  const size_t original = train.size();
  for (size_t i = 0; i < original; ++i) {
    IndexedTriple it = train[i];  // copy: push may reallocate `train`
    const RelationDef& def = space.rel_defs_[it.key.r];
    if (def.symmetric) push(it.key.t, it.key.r, it.key.h, it.sentence);
  }
  // Capped 1-step transitive closure over the original edges.
  for (int r = 0; r < nr; ++r) {
    if (!space.rel_defs_[r].transitive) continue;
    std::vector<std::pair<int, int>> pairs;
    for (size_t i = 0; i < original; ++i)
      if (train[i].key.r == r)
        pairs.emplace_back(train[i].key.h, train[i].key.t);
    std::sort(pairs.begin(), pairs.end());
    int added = 0;
    for (auto [a, b] : pairs) {
      for (auto [b2, c] : pairs) {
        if (b2 != b || a == c) continue;
        TripleKey key{a, r, c};
        if (known.count(key)) continue;
        known.insert(key);
        train.push_back({key, nullptr});
        if (++added >= config.closure_cap) break;
      }
      if (added >= config.closure_cap) break;
    }
  }

  // Pre-embed the sentences once; the encoder is fixed during training.
  std::vector<int> sentence_of(train.size(), -1);
  std::vector<Eigen::VectorXd> sentence_vecs;
  for (size_t i = 0; i < train.size(); ++i) {
    if (train[i].sentence == nullptr) continue;
    sentence_of[i] = static_cast<int>(sentence_vecs.size());
    sentence_vecs.push_back(space.dan.embed(*train[i].sentence));
  }

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const double lr = config.lr;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      const TripleKey key = train[idx].key;
      for (int neg = 0; neg < config.neg_per_pos; ++neg) {
        // Corrupt head or tail uniformly; never emit a known triple.
        TripleKey corrupt = key;
        bool found = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
          bool corrupt_head = rng.uniform_int(2) == 0;
          int candidate = static_cast<int>(rng.uniform_int(ne));
          corrupt = key;
          if (corrupt_head)
            corrupt.h = candidate;
          else
            corrupt.t = candidate;
          if (corrupt.h != corrupt.t && !known.count(corrupt)) {
            found = true;
            break;
          }
        }
        if (!found) continue;

        Eigen::VectorXd pos_diff = (space.ent.row(key.h) +
                                    space.rel.row(key.r) -
                                    space.ent.row(key.t))
                                       .transpose();
        Eigen::VectorXd neg_diff = (space.ent.row(corrupt.h) +
                                    space.rel.row(corrupt.r) -
                                    space.ent.row(corrupt.t))
                                       .transpose();
        double hinge =
            config.gamma + l1_norm(pos_diff) - l1_norm(neg_diff);
        if (hinge <= 0) continue;

        Eigen::VectorXd gpos = sign_vec(pos_diff);
        Eigen::VectorXd gneg = sign_vec(neg_diff);
        space.ent.row(key.h) -= lr * gpos.transpose();
        space.ent.row(key.t) += lr * gpos.transpose();
        space.rel.row(key.r) -= lr * (gpos - gneg).transpose();
        space.ent.row(corrupt.h) += lr * gneg.transpose();
        space.ent.row(corrupt.t) -= lr * gneg.transpose();

        normalize_row(space.ent, key.h);
        normalize_row(space.ent, key.t);
        normalize_row(space.ent, corrupt.h);
        normalize_row(space.ent, corrupt.t);
      }
    }

    // Context alignment: head/tail corruption cancels the context term in
    // the hinge, so the projection is fitted by its own subgradient pass
    // against the current relation vectors.
    if (config.lambda > 0.0 && !sentence_vecs.empty()) {
      for (size_t idx : order) {
        int s = sentence_of[idx];
        if (s < 0) continue;
        const Eigen::VectorXd& sv = sentence_vecs[s];
        Eigen::VectorXd diff =
            space.P * sv - space.rel.row(train[idx].key.r).transpose();
        space.P -= lr * config.lambda * sign_vec(diff) * sv.transpose();
      }
    }
  }
  return space;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

std::map<std::string, double> fit_thresholds(
    const TripleEmbeddingSpace& space, const std::vector<Triple>& valid_pos,
    const std::vector<Triple>& valid_neg) {
  std::map<std::string, std::vector<std::pair<double, bool>>> by_rel;
  for (const auto& t : valid_pos) by_rel[t.rel].emplace_back(space.score(t), true);
  for (const auto& t : valid_neg)
    by_rel[t.rel].emplace_back(space.score(t), false);

  std::map<std::string, double> out;
  for (auto& [rel, scored] : by_rel) {
    std::vector<double> candidates;
    std::vector<double> values;
    for (auto& [e, _] : scored) values.push_back(e);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    candidates.push_back(values.front() - 1.0);
    for (size_t i = 0; i + 1 < values.size(); ++i)
      candidates.push_back(0.5 * (values[i] + values[i + 1]));
    candidates.push_back(values.back() + 1.0);

    double best_thr = candidates.front();
    int best_correct = -1;
    for (double thr : candidates) {
      int correct = 0;
      for (auto& [e, positive] : scored)
        if ((e <= thr) == positive) ++correct;
      if (correct > best_correct) {
        best_correct = correct;
        best_thr = thr;
      }
    }
    out[rel] = best_thr;
  }
  return out;
}

bool classify_triple(const Triple& triple, const TripleEmbeddingSpace& space,
                     const std::map<std::string, double>& thresholds) {
  auto it = thresholds.find(triple.rel);
  if (it == thresholds.end())
    throw UnknownRelation("no threshold fitted for relation: " + triple.rel);
  return space.score(triple) <= it->second;
}

// ---------------------------------------------------------------------------
// Interchange and checkpoints
// ---------------------------------------------------------------------------

std::vector<Triple> triples_from_tsv(std::string_view text) {
  std::vector<Triple> out;
  int lineno = 0;
  for (const auto& line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    auto fields = split_on(line, '\t');
    if (fields.size() < 3)
      throw ParseError("triple line " + std::to_string(lineno) +
                       ": expected head<TAB>relation<TAB>tail");
    Triple t;
    t.head = trim(fields[0]);
    t.rel = trim(fields[1]);
    t.tail = trim(fields[2]);
    if (fields.size() >= 4) {
      for (const auto& tok : tokenize(trim(fields[3]), 0))
        t.sentence.push_back(tok.text);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::string triples_to_tsv(const std::vector<Triple>& triples) {
  std::string out;
  for (const auto& t : triples) {
    out += t.head;
    out.push_back('\t');
    out += t.rel;
    out.push_back('\t');
    out += t.tail;
    if (t.has_sentence()) {
      out.push_back('\t');
      for (size_t i = 0; i < t.sentence.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += t.sentence[i];
      }
    }
    out.push_back('\n');
  }
  return out;
}

namespace {

void write_matrix(std::string& out, const std::string& name,
                  const Eigen::MatrixXd& m) {
  out += "param " + name + " " + std::to_string(m.rows()) + " " +
         std::to_string(m.cols()) + "\n";
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c > 0) out.push_back(' ');
      out += format_double(m(r, c));
    }
    out.push_back('\n');
  }
}

Eigen::MatrixXd read_matrix(const std::vector<std::string>& lines, size_t& pos,
                            const std::string& expect_name) {
  auto fields = split_ws(lines.at(pos++));
  if (fields.size() != 4 || fields[0] != "param" || fields[1] != expect_name)
    throw ParseError("space checkpoint: expected param " + expect_name);
  int rows = std::stoi(fields[2]);
  int cols = std::stoi(fields[3]);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    auto vals = split_ws(lines.at(pos++));
    if (static_cast<int>(vals.size()) != cols)
      throw ParseError("space checkpoint: short row in " + expect_name);
    for (int c = 0; c < cols; ++c) m(r, c) = std::stod(vals[c]);
  }
  return m;
}

}  // namespace

void TripleEmbeddingSpace::save(const std::string& path) const {
  std::string out;
  out += "ontopop-relembed 1\n";
  out += "entities " + std::to_string(ent_names_.size()) + "\n";
  out += "relations " + std::to_string(rel_names_.size()) + "\n";
  out += "k " + std::to_string(k()) + "\n";
  out += "d_s " + std::to_string(dan.d_s()) + "\n";
  out += "lambda " + format_double(lambda_) + "\n";
  write_matrix(out, "ent", ent);
  write_matrix(out, "rel", rel);
  write_matrix(out, "P", P);
  write_matrix(out, "dan.words", dan.words);
  write_matrix(out, "dan.bigrams", dan.bigrams);
  write_matrix(out, "dan.W1", dan.W1);
  write_matrix(out, "dan.W2", dan.W2);
  write_matrix(out, "dan.b1", dan.b1);
  write_matrix(out, "dan.b2", dan.b2);
  out += "end\n";
  write_file(path, out);

  std::string ents;
  for (size_t i = 0; i < ent_names_.size(); ++i)
    ents += std::to_string(i) + "\t" + ent_names_[i] + "\n";
  write_file(path + ".entities.tsv", ents);
  std::string rels;
  for (size_t i = 0; i < rel_names_.size(); ++i) {
    const RelationDef& d = rel_defs_[i];
    rels += std::to_string(i) + "\t" + rel_names_[i] + "\t" +
            (d.symmetric ? "symmetric" : "-") + "\t" +
            (d.transitive ? "transitive" : "-") + "\t" +
            (d.hierarchical ? "hierarchical" : "-") + "\n";
  }
  write_file(path + ".relations.tsv", rels);
}

TripleEmbeddingSpace TripleEmbeddingSpace::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw MissingModel("relation-embedding checkpoint not found: " + path);
  }
  auto lines = split_lines(text);
  size_t pos = 0;
  if (lines.at(pos++) != "ontopop-relembed 1")
    throw ParseError("not a relation-embedding checkpoint: " + path);
  auto kv = [&](const std::string& key) {
    auto fields = split_ws(lines.at(pos++));
    if (fields.size() != 2 || fields[0] != key)
      throw ParseError("space checkpoint: expected '" + key + " <value>'");
    return fields[1];
  };
  size_t ne = std::stoul(kv("entities"));
  size_t nr = std::stoul(kv("relations"));
  (void)std::stoi(kv("k"));
  (void)std::stoi(kv("d_s"));
  TripleEmbeddingSpace space;
  space.lambda_ = std::stod(kv("lambda"));
  space.ent = read_matrix(lines, pos, "ent");
  space.rel = read_matrix(lines, pos, "rel");
  space.P = read_matrix(lines, pos, "P");
  space.dan.words = read_matrix(lines, pos, "dan.words");
  space.dan.bigrams = read_matrix(lines, pos, "dan.bigrams");
  space.dan.W1 = read_matrix(lines, pos, "dan.W1");
  space.dan.W2 = read_matrix(lines, pos, "dan.W2");
  space.dan.b1 = read_matrix(lines, pos, "dan.b1");
  space.dan.b2 = read_matrix(lines, pos, "dan.b2");

  auto ent_lines = split_lines(read_file(path + ".entities.tsv"));
  for (const auto& l : ent_lines) {
    if (trim(l).empty()) continue;
    auto f = split_on(l, '\t');
    if (f.size() < 2) throw ParseError("bad entity sidecar line: " + l);
    space.ent_names_.push_back(f[1]);
  }
  auto rel_lines = split_lines(read_file(path + ".relations.tsv"));
  for (const auto& l : rel_lines) {
    if (trim(l).empty()) continue;
    auto f = split_on(l, '\t');
    if (f.size() < 5) throw ParseError("bad relation sidecar line: " + l);
    space.rel_names_.push_back(f[1]);
    RelationDef d;
    d.name = f[1];
    d.symmetric = f[2] == "symmetric";
    d.transitive = f[3] == "transitive";
    d.hierarchical = f[4] == "hierarchical";
    space.rel_defs_.push_back(std::move(d));
  }
  if (space.ent_names_.size() != ne || space.rel_names_.size() != nr)
    throw ParseError("space checkpoint sidecars do not match header counts");
  space.rebuild_index();
  return space;
}

}  // namespace ontopop
