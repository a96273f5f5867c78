#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ontopop/classifier.hpp"
#include "ontopop/util.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ontopop;
using namespace ontopop::testsupport;

namespace {

ClassifierConfig tiny_config(EncoderKind kind, bool features, int d_w = 3,
                             int D = 5) {
  ClassifierConfig cfg;
  cfg.d_w = d_w;
  cfg.d_f = 2;
  cfg.D = D;
  cfg.hidden = 4;
  cfg.attention_dim = 3;
  cfg.encoder = kind;
  cfg.use_features = features;
  cfg.seed = 7;
  return cfg;
}

std::vector<TypePath> label_list(std::initializer_list<const char*> paths) {
  std::vector<TypePath> out;
  for (const char* p : paths) out.push_back(TypePath::parse(p));
  return out;
}

}  // namespace

TEST_CASE("encode_mention: mean of one token is that embedding") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, false, 3, 3);
  ClassifierModel model(cfg, {"a", "b"}, {}, label_list({"/person"}));
  model.params.E.row(model.word_index("a")) << 1.0, 2.0, 3.0;
  Eigen::VectorXd v = model.encode_mention({"a"}, {});
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 2.0);
  CHECK(v(2) == 3.0);
}

TEST_CASE("encode_mention: symmetric mean") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, false, 2, 2);
  ClassifierModel model(cfg, {"a", "b"}, {}, label_list({"/person"}));
  model.params.E.row(model.word_index("a")) << 1.0, 0.0;
  model.params.E.row(model.word_index("b")) << 0.0, 1.0;
  Eigen::VectorXd v = model.encode_mention({"a", "b"}, {});
  CHECK(v(0) == doctest::Approx(0.5));
  CHECK(v(1) == doctest::Approx(0.5));
}

TEST_CASE("encode_mention: unknown words hit the unk row") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, false, 3, 3);
  ClassifierModel model(cfg, {"known"}, {}, label_list({"/person"}));
  Eigen::VectorXd unk_row =
      model.params.E.row(model.word_index("<unk>")).transpose();
  Eigen::VectorXd v = model.encode_mention({"never-seen"}, {});
  CHECK((v - unk_row).norm() == 0.0);
}

TEST_CASE("encode_mention rejects empty mentions") {
  ClassifierModel model(tiny_config(EncoderKind::averaging, false), {"a"}, {},
                        label_list({"/person"}));
  CHECK_THROWS_AS(model.encode_mention({}, {}), EmptyMention);
}

TEST_CASE("averaging context encoder") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, false, 2, 4);
  ClassifierModel model(cfg, {"a", "b"}, {}, label_list({"/person"}));
  model.params.E.row(model.word_index("a")) << 2.0, 4.0;
  model.params.E.row(model.word_index("b")) << 6.0, 8.0;

  // empty context: defined degenerate case
  CHECK(model.encode_context_avg({}, {}).norm() == 0.0);
  // mean idempotence for a repeated token, any repetition count
  for (int k : {1, 2, 5}) {
    std::vector<std::string> toks(k, "a");
    Eigen::VectorXd v = model.encode_context_avg(toks, {});
    CHECK(v(0) == doctest::Approx(2.0));
    CHECK(v(1) == doctest::Approx(4.0));
    CHECK(v(2) == 0.0);  // zero padding up to D
  }
  // two known embeddings -> componentwise mean (direct arithmetic)
  Eigen::VectorXd v = model.encode_context_avg({"a", "b"}, {});
  CHECK(v(0) == doctest::Approx((2.0 + 6.0) / 2));
  CHECK(v(1) == doctest::Approx((4.0 + 8.0) / 2));
}

TEST_CASE("rnn context encoder: degenerate cases and scalar hand check") {
  ClassifierConfig cfg = tiny_config(EncoderKind::rnn, false, 1, 1);
  ClassifierModel model(cfg, {"x"}, {}, label_list({"/person"}));

  CHECK(model.encode_context_rnn(Side::left, {}, {}).norm() == 0.0);

  // zero weights, tanh cell: zero state for any input
  model.params.rnn_left.Wx.setZero();
  model.params.rnn_left.Wh.setZero();
  model.params.rnn_left.b.setZero();
  CHECK(model.encode_context_rnn(Side::left, {"x", "x", "x"}, {}).norm() ==
        0.0);

  // one cell application at scalar dimension: h = tanh(wx*e + b)
  model.params.E(model.word_index("x"), 0) = 2.0;
  model.params.rnn_left.Wx(0, 0) = 0.5;
  model.params.rnn_left.b(0, 0) = 0.1;
  double expected = std::tanh(0.5 * 2.0 + 0.1);
  CHECK(model.encode_context_rnn(Side::left, {"x"}, {})(0) ==
        doctest::Approx(expected).epsilon(1e-12));

  // two steps: h2 = tanh(wx*e + wh*h1 + b)
  model.params.rnn_left.Wh(0, 0) = -0.3;
  double h1 = std::tanh(0.5 * 2.0 + 0.1);
  double h2 = std::tanh(0.5 * 2.0 - 0.3 * h1 + 0.1);
  CHECK(model.encode_context_rnn(Side::left, {"x", "x"}, {})(0) ==
        doctest::Approx(h2).epsilon(1e-12));
}

TEST_CASE("attentive encoder: uniform logits reduce to state averaging") {
  ClassifierConfig cfg = tiny_config(EncoderKind::attentive, true);
  ClassifierModel model(cfg, {"a", "b", "c"}, {"NONE"},
                        label_list({"/person"}));
  model.params.att_left.Wa.setZero();  // logits all zero -> uniform softmax

  std::vector<std::string> toks = {"a", "b", "c", "a"};
  Eigen::MatrixXd states = model.birnn_states(Side::left, toks, {});
  Eigen::VectorXd mean_state = states.rowwise().mean();
  Eigen::VectorXd expected = model.params.att_left.P * mean_state;
  Eigen::VectorXd got = model.encode_context_attentive(Side::left, toks, {});
  CHECK((got - expected).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("attentive encoder: single token is a fixed point of attention") {
  ClassifierConfig cfg = tiny_config(EncoderKind::attentive, false);
  ClassifierModel model(cfg, {"a"}, {}, label_list({"/person"}));
  Eigen::MatrixXd states = model.birnn_states(Side::right, {"a"}, {});
  Eigen::VectorXd expected = model.params.att_right.P * states.col(0);
  Eigen::VectorXd got = model.encode_context_attentive(Side::right, {"a"}, {});
  CHECK((got - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(model.encode_context_attentive(Side::right, {}, {}).norm() == 0.0);
}

TEST_CASE("attentive encoder matches a naive independent forward pass") {
  // Re-derives the whole attentive path with plain loops: softmax over
  // wa.tanh(Wa s_i) scores, weighted state sum, projection.
  ClassifierConfig cfg = tiny_config(EncoderKind::attentive, false, 2, 4);
  ClassifierModel model(cfg, {"a", "b", "c"}, {}, label_list({"/person"}));
  std::vector<std::string> toks = {"b", "a", "c"};

  const auto& att = model.params.att_left;
  const int h = cfg.hidden;
  const size_t n = toks.size();
  std::vector<Eigen::VectorXd> x(n);
  for (size_t i = 0; i < n; ++i)
    x[i] = model.params.E.row(model.word_index(toks[i])).transpose();

  std::vector<Eigen::VectorXd> hf(n), hb(n);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
  for (size_t i = 0; i < n; ++i)
    hf[i] = state =
        (att.fwd.Wx * x[i] + att.fwd.Wh * state + att.fwd.b.col(0))
            .array()
            .tanh();
  state = Eigen::VectorXd::Zero(h);
  for (size_t i = n; i-- > 0;)
    hb[i] = state =
        (att.bwd.Wx * x[i] + att.bwd.Wh * state + att.bwd.b.col(0))
            .array()
            .tanh();

  std::vector<double> logits(n);
  std::vector<Eigen::VectorXd> s(n);
  for (size_t i = 0; i < n; ++i) {
    s[i].resize(2 * h);
    s[i] << hf[i], hb[i];
    Eigen::VectorXd q = (att.Wa * s[i]).array().tanh();
    logits[i] = att.wa.col(0).dot(q);
  }
  double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0;
  for (double l : logits) denom += std::exp(l - zmax);
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(2 * h);
  for (size_t i = 0; i < n; ++i)
    weighted += std::exp(logits[i] - zmax) / denom * s[i];
  Eigen::VectorXd expected = att.P * weighted;

  Eigen::VectorXd got = model.encode_context_attentive(Side::left, toks, {});
  CHECK((got - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("classify head: sigmoid values and shapes") {
  // Wy v = 0 -> 0.5 everywhere
  Eigen::MatrixXd Wy = Eigen::MatrixXd::Zero(4, 6);
  Eigen::VectorXd v = Eigen::VectorXd::Random(6);
  Eigen::VectorXd y = classify_head(v, Wy);
  for (int k = 0; k < y.size(); ++k) CHECK(y(k) == 0.5);

  // logit ln 3 -> exactly 3/4 up to rounding
  Eigen::MatrixXd Wy1(1, 1);
  Wy1 << std::log(3.0);
  Eigen::VectorXd v1(1);
  v1 << 1.0;
  CHECK(classify_head(v1, Wy1)(0) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(classify_head(Eigen::VectorXd::Zero(5), Wy),
                  DimensionMismatch);
}

TEST_CASE("classify with an OntoNotes-sized head stays inside (0,1)") {
  std::vector<TypePath> labels;
  for (int i = 0; i < 89; ++i)
    labels.push_back(TypePath::parse("/t" + std::to_string(i)));
  ClassifierModel model(tiny_config(EncoderKind::averaging, false), {"a"}, {},
                        labels);
  MentionContext ctx;
  ctx.mention = {"a"};
  Eigen::VectorXd y = model.classify(ctx);
  REQUIRE(y.size() == 89);
  for (int k = 0; k < y.size(); ++k) {
    CHECK(y(k) > 0.0);
    CHECK(y(k) < 1.0);
  }
}

TEST_CASE("bce_loss values") {
  // symmetric point: K * ln 2
  Eigen::VectorXd y = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd t(3);
  t << 1, 0, 1;
  CHECK(bce_loss(y, t) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

  // direct evaluation oracle
  Eigen::VectorXd y1(1), t1(1);
  y1 << 0.9;
  t1 << 1;
  CHECK(bce_loss(y1, t1) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));

  Eigen::VectorXd y2(2), t2(2);
  y2 << 0.9, 0.1;
  t2 << 1, 0;
  CHECK(bce_loss(y2, t2) ==
        doctest::Approx(2.0 * -std::log(0.9)).epsilon(1e-12));

  // clamped extremes stay finite and non-negative
  Eigen::VectorXd y3(2), t3(2);
  y3 << 0.0, 1.0;
  t3 << 1, 0;
  CHECK(std::isfinite(bce_loss(y3, t3)));
  CHECK(bce_loss(y3, t3) >= 0.0);
}

TEST_CASE("gradients match finite differences on every encoder") {
  Rng rng(99);
  std::vector<std::string> vocab = {"a", "b", "c", "d"};
  std::vector<std::string> tags = {"NONE", "/person", "alpha"};
  auto labels = label_list({"/person", "/org", "/location"});
  for (EncoderKind kind :
       {EncoderKind::averaging, EncoderKind::rnn, EncoderKind::attentive}) {
    for (bool features : {false, true}) {
      ClassifierModel model(tiny_config(kind, features), vocab,
                            features ? tags : std::vector<std::string>{},
                            labels);
      for (int i = 0; i < 2; ++i) {
        TrainingExample ex = random_small_example(rng, labels, vocab, tags);
        auto res = check_gradients(model, ex, 1e-4);
        INFO("encoder=" << static_cast<int>(kind) << " features=" << features
                        << " worst=" << res.worst_param);
        CHECK(res.max_rel_err < 1e-3);
      }
    }
  }
}

TEST_CASE("memorizing one example drives the loss near zero") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, true);
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.lr = 0.1;
  TrainingExample ex;
  ex.ctx.left = {"the"};
  ex.ctx.mention = {"senator"};
  ex.ctx.right = {"spoke"};
  ex.ctx.features = {"NONE", "/person", "NONE"};
  ex.labels = {TypePath::parse("/person"),
               TypePath::parse("/person/politician")};
  TrainResult res = train_classifier({ex}, typing_schema(), cfg);
  CHECK(res.epoch_loss.back() < 0.05);
}

TEST_CASE("lr 0 leaves parameters bit-identical") {
  TrainingExample ex;
  ex.ctx.mention = {"x"};
  ex.labels = {TypePath::parse("/person")};

  ClassifierConfig cfg = tiny_config(EncoderKind::rnn, true);
  cfg.epochs = 0;  // initialization only
  TrainResult init = train_classifier({ex}, typing_schema(), cfg);
  cfg.epochs = 3;
  cfg.lr = 0.0;
  TrainResult res = train_classifier({ex}, typing_schema(), cfg);

  std::vector<const Eigen::MatrixXd*> pa, pb;
  init.model.params.for_each(
      [&](const std::string&, const Eigen::MatrixXd& m) { pa.push_back(&m); });
  res.model.params.for_each(
      [&](const std::string&, const Eigen::MatrixXd& m) { pb.push_back(&m); });
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->rows() == pb[i]->rows());
    CHECK(pa[i]->binaryExpr(*pb[i], [](double a, double b) {
                return a == b ? 0.0 : 1.0;
              }).sum() == 0.0);
  }
}

TEST_CASE("training is deterministic under a fixed seed") {
  auto bench = make_typing_benchmark(60, 0, 42);
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, true);
  cfg.epochs = 3;
  TrainResult a = train_classifier(bench.train, typing_schema(), cfg);
  TrainResult b = train_classifier(bench.train, typing_schema(), cfg);
  REQUIRE(a.epoch_loss.size() == b.epoch_loss.size());
  for (size_t i = 0; i < a.epoch_loss.size(); ++i)
    CHECK(a.epoch_loss[i] == b.epoch_loss[i]);
}

TEST_CASE("mean epoch loss is non-increasing early in training") {
  auto bench = make_typing_benchmark(300, 0, 5);
  ClassifierConfig cfg;
  cfg.d_w = 20;
  cfg.d_f = 5;
  cfg.D = 25;
  cfg.encoder = EncoderKind::averaging;
  cfg.epochs = 3;
  cfg.seed = 5;
  TrainResult res = train_classifier(bench.train, typing_schema(), cfg);
  REQUIRE(res.epoch_loss.size() == 3);
  CHECK(res.epoch_loss[0] >= res.epoch_loss[1]);
  CHECK(res.epoch_loss[1] >= res.epoch_loss[2]);
}

TEST_CASE("train rejects an empty dataset") {
  CHECK_THROWS_AS(
      train_classifier({}, typing_schema(), tiny_config(EncoderKind::averaging, true)),
      EmptyDataset);
}

TEST_CASE("decode_labels: threshold, argmax fallback, closure, tie-break") {
  const OntologySchema& schema = typing_schema();
  auto labels = label_list({"/person", "/org"});

  Eigen::VectorXd y(2);
  y << 0.9, 0.1;
  CHECK(decode_labels(y, labels, schema, 0.5) ==
        std::set<TypePath>{TypePath::parse("/person")});

  // argmax fallback + ancestor closure (oracle: closure by hand)
  auto labels2 = label_list({"/org", "/person/politician"});
  Eigen::VectorXd y2(2);
  y2 << 0.2, 0.3;
  CHECK(decode_labels(y2, labels2, schema, 0.5) ==
        std::set<TypePath>{TypePath::parse("/person"),
                           TypePath::parse("/person/politician")});

  // exact tie: lowest label index wins
  Eigen::VectorXd y3(2);
  y3 << 0.4, 0.4;
  CHECK(decode_labels(y3, labels, schema, 0.5) ==
        std::set<TypePath>{TypePath::parse("/person")});

  // result is never empty and always ancestor-closed
  Eigen::VectorXd y4(2);
  y4 << 0.01, 0.02;
  auto decoded = decode_labels(y4, labels2, schema, 0.5);
  CHECK(!decoded.empty());
  for (const auto& l : decoded)
    for (const auto& a : ancestors(l)) CHECK(decoded.count(a) == 1);
}

TEST_CASE("evaluate: exact match, disjoint, mixed pooled counts") {
  auto person = TypePath::parse("/person");
  auto org = TypePath::parse("/org");
  auto politician = TypePath::parse("/person/politician");

  std::vector<std::set<TypePath>> gold = {{person}, {org}};
  CHECK(evaluate(gold, gold).macro_f1 == doctest::Approx(1.0));
  CHECK(evaluate(gold, gold).micro_f1 == doctest::Approx(1.0));

  std::vector<std::set<TypePath>> wrong = {{org}, {person}};
  CHECK(evaluate(wrong, gold).macro_f1 == doctest::Approx(0.0));
  CHECK(evaluate(wrong, gold).micro_f1 == doctest::Approx(0.0));

  // one exact match + one half overlap; frozen from pooled-count oracle
  std::vector<std::set<TypePath>> pred2 = {{person}, {person}};
  std::vector<std::set<TypePath>> gold2 = {{person}, {person, politician}};
  EvalResult r = evaluate(pred2, gold2);
  CHECK(r.macro_f1 == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(r.micro_f1 == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate({{person}}, {}), LengthMismatch);
}

TEST_CASE("permuting the label order permutes the outputs") {
  ClassifierConfig cfg = tiny_config(EncoderKind::averaging, false);
  auto labels_ab = label_list({"/org", "/person"});
  auto labels_ba = label_list({"/person", "/org"});
  ClassifierModel a(cfg, {"x"}, {}, labels_ab);
  ClassifierModel b(cfg, {"x"}, {}, labels_ba);
  b.params = a.params;
  b.params.Wy.row(0) = a.params.Wy.row(1);
  b.params.Wy.row(1) = a.params.Wy.row(0);

  MentionContext ctx;
  ctx.mention = {"x"};
  ctx.left = {"x"};
  Eigen::VectorXd ya = a.classify(ctx);
  Eigen::VectorXd yb = b.classify(ctx);
  CHECK(ya(0) == yb(1));
  CHECK(ya(1) == yb(0));
  // and the argmax label is invariant under the relabeling
  const OntologySchema& schema = typing_schema();
  CHECK(decode_labels(ya, labels_ab, schema) ==
        decode_labels(yb, labels_ba, schema));
}

TEST_CASE("checkpoint round trip preserves behavior exactly") {
  auto bench = make_typing_benchmark(40, 0, 3);
  ClassifierConfig cfg = tiny_config(EncoderKind::attentive, true);
  cfg.epochs = 2;
  TrainResult res = train_classifier(bench.train, typing_schema(), cfg);

  std::string path =
      (std::filesystem::temp_directory_path() / "clf_roundtrip.model").string();
  res.model.save(path);
  ClassifierModel loaded = ClassifierModel::load(path);

  MentionContext ctx = bench.train[0].ctx;
  Eigen::VectorXd y1 = res.model.classify(ctx);
  Eigen::VectorXd y2 = loaded.classify(ctx);
  REQUIRE(y1.size() == y2.size());
  for (int k = 0; k < y1.size(); ++k) CHECK(y1(k) == y2(k));
  std::filesystem::remove(path);
}

TEST_CASE("missing checkpoint raises MissingModel") {
  CHECK_THROWS_AS(ClassifierModel::load("/nonexistent/path.model"),
                  MissingModel);
}

TEST_CASE("embedding import format") {
  auto [vocab, mat] = parse_embedding_text("2 3\nalpha 1 2 3\nbeta 4 5 6\n");
  REQUIRE(vocab.size() == 2);
  CHECK(vocab[0] == "alpha");
  CHECK(mat(1, 2) == 6.0);
  CHECK_THROWS_AS(parse_embedding_text("2 3\nalpha 1 2\n"), ParseError);
  CHECK_THROWS_AS(parse_embedding_text(""), ParseError);
}

TEST_CASE("training data JSONL round trip") {
  auto bench = make_typing_benchmark(5, 0, 11);
  std::string jsonl = examples_to_jsonl(bench.train);
  auto back = examples_from_jsonl(jsonl, typing_schema());
  REQUIRE(back.size() == bench.train.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].ctx.mention == bench.train[i].ctx.mention);
    CHECK(back[i].ctx.features == bench.train[i].ctx.features);
    CHECK(back[i].labels == expand_labels(bench.train[i].labels, typing_schema()));
  }
}

TEST_CASE("make_context windows are nearest-first") {
  Document d{"d", "a b c M N x y z", std::nullopt};
  Sentence s = segment(d)[0];
  MentionContext ctx = make_context(s, 3, 4, 2, {});
  CHECK(ctx.mention == std::vector<std::string>{"M", "N"});
  CHECK(ctx.left == std::vector<std::string>{"c", "b"});   // nearest first
  CHECK(ctx.right == std::vector<std::string>{"x", "y"});  // nearest first
  CHECK(ctx.features.size() == 6);
}
