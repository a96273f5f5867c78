#include "ontopop/classifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ontopop/util.hpp"

namespace ontopop {

namespace {
constexpr double kClampEps = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

std::string_view encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::averaging:
      return "averaging";
    case EncoderKind::rnn:
      return "rnn";
    case EncoderKind::attentive:
      return "attentive";
  }
  return "averaging";
}

EncoderKind encoder_from_name(std::string_view name) {
  if (name == "averaging") return EncoderKind::averaging;
  if (name == "rnn") return EncoderKind::rnn;
  if (name == "attentive") return EncoderKind::attentive;
  throw ParseError("unknown encoder kind: " + std::string(name));
}

ClassifierModel::ClassifierModel(ClassifierConfig config,
                                 std::vector<std::string> vocab,
                                 std::vector<std::string> feature_vocab,
                                 std::vector<TypePath> labels)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      feature_vocab_(std::move(feature_vocab)),
      labels_(std::move(labels)) {
  if (vocab_.empty() || vocab_[0] != "<unk>")
    vocab_.insert(vocab_.begin(), "<unk>");
  if (std::find(feature_vocab_.begin(), feature_vocab_.end(), "NONE") ==
      feature_vocab_.end())
    feature_vocab_.insert(feature_vocab_.begin(), "NONE");

  for (size_t i = 0; i < vocab_.size(); ++i)
    word_index_[vocab_[i]] = static_cast<int>(i);
  for (size_t i = 0; i < feature_vocab_.size(); ++i)
    feature_index_[feature_vocab_[i]] = static_cast<int>(i);
  unk_index_ = word_index_.at("<unk>");
  none_feature_index_ = feature_index_.at("NONE");

  const int m = config_.d_w + (config_.use_features ? config_.d_f : 0);
  if (m > config_.D)
    throw DimensionMismatch("token input width " + std::to_string(m) +
                            " exceeds representation width D=" +
                            std::to_string(config_.D));
  if (labels_.empty()) throw ValidationError("classifier needs >= 1 label");

  const int D = config_.D;
  const int h = config_.hidden;
  const int A = config_.attention_dim;
  const int K = static_cast<int>(labels_.size());

  params.E.resize(static_cast<int>(vocab_.size()), config_.d_w);
  if (config_.use_features)
    params.F.resize(static_cast<int>(feature_vocab_.size()), config_.d_f);
  params.Wy.resize(K, 3 * D);
  if (config_.encoder == EncoderKind::rnn) {
    for (auto* cell : {&params.rnn_left, &params.rnn_right}) {
      cell->Wx.resize(D, m);
      cell->Wh.resize(D, D);
      cell->b.resize(D, 1);
    }
  } else if (config_.encoder == EncoderKind::attentive) {
    for (auto* att : {&params.att_left, &params.att_right}) {
      for (auto* cell : {&att->fwd, &att->bwd}) {
        cell->Wx.resize(h, m);
        cell->Wh.resize(h, h);
        cell->b.resize(h, 1);
      }
      att->Wa.resize(A, 2 * h);
      att->wa.resize(A, 1);
      att->P.resize(D, 2 * h);
    }
  }

  Rng rng(config_.seed);
  params.for_each([&](const std::string&, Eigen::MatrixXd& mat) {
    for (int r = 0; r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) mat(r, c) = rng.uniform(-0.05, 0.05);
  });
}

int ClassifierModel::word_index(const std::string& token) const {
  auto it = word_index_.find(token);
  return it == word_index_.end() ? unk_index_ : it->second;
}

int ClassifierModel::feature_index(const std::string& tag) const {
  auto it = feature_index_.find(tag);
  return it == feature_index_.end() ? none_feature_index_ : it->second;
}

// ---------------------------------------------------------------------------
// Forward / backward internals
// ---------------------------------------------------------------------------

namespace {

struct TokenInput {
  int word = 0;
  std::vector<int> tags;
  Eigen::VectorXd x;  // word embedding (+ mean feature embedding)
};

struct SegTrace {
  std::vector<TokenInput> toks;
  // rnn: h[t] is the state after consuming token t (h has size n).
  std::vector<Eigen::VectorXd> h;
  // attentive
  std::vector<Eigen::VectorXd> hf, hb, s, q;
  Eigen::VectorXd logits, alpha, u;
  Eigen::VectorXd out;  // width D
};

}  // namespace

struct ClassifierForward {
  const ClassifierModel& model;
  const ClassifierConfig& cfg;

  explicit ClassifierForward(const ClassifierModel& m)
      : model(m), cfg(m.config()) {}

  int input_width() const {
    return cfg.d_w + (cfg.use_features ? cfg.d_f : 0);
  }

  std::vector<TokenInput> embed(const std::vector<std::string>& tokens,
                                const std::vector<std::string>& tags) const {
    std::vector<TokenInput> out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
      TokenInput ti;
      ti.word = model.word_index(tokens[i]);
      Eigen::VectorXd x(input_width());
      x.head(cfg.d_w) = model.params.E.row(ti.word).transpose();
      if (cfg.use_features) {
        ti.tags.push_back(model.feature_index(
            std::string(shape_name(classify_token_shape(tokens[i])))));
        std::string coarse = i < tags.size() ? tags[i] : "NONE";
        ti.tags.push_back(model.feature_index(coarse.empty() ? "NONE" : coarse));
        Eigen::VectorXd f = Eigen::VectorXd::Zero(cfg.d_f);
        for (int tag : ti.tags) f += model.params.F.row(tag).transpose();
        x.tail(cfg.d_f) = f / static_cast<double>(ti.tags.size());
      }
      ti.x = std::move(x);
      out.push_back(std::move(ti));
    }
    return out;
  }

  // Mean of token inputs, zero-padded to D. Empty input gives zero.
  SegTrace forward_avg(std::vector<TokenInput> toks) const {
    SegTrace t;
    t.toks = std::move(toks);
    t.out = Eigen::VectorXd::Zero(cfg.D);
    if (t.toks.empty()) return t;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(input_width());
    for (const auto& ti : t.toks) mean += ti.x;
    mean /= static_cast<double>(t.toks.size());
    t.out.head(input_width()) = mean;
    return t;
  }

  SegTrace forward_rnn(std::vector<TokenInput> toks,
                       const RnnCellParams& cell) const {
    SegTrace t;
    t.toks = std::move(toks);
    t.out = Eigen::VectorXd::Zero(cfg.D);
    if (t.toks.empty()) return t;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.D);
    for (const auto& ti : t.toks) {
      h = (cell.Wx * ti.x + cell.Wh * h + cell.b.col(0)).array().tanh();
      t.h.push_back(h);
    }
    t.out = t.h.back();
    return t;
  }

  SegTrace forward_attentive(std::vector<TokenInput> toks,
                             const AttentiveParams& att) const {
    SegTrace t;
    t.toks = std::move(toks);
    t.out = Eigen::VectorXd::Zero(cfg.D);
    const size_t n = t.toks.size();
    if (n == 0) return t;
    const int h = cfg.hidden;

    t.hf.resize(n);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
    for (size_t i = 0; i < n; ++i) {
      state = (att.fwd.Wx * t.toks[i].x + att.fwd.Wh * state +
               att.fwd.b.col(0))
                  .array()
                  .tanh();
      t.hf[i] = state;
    }
    t.hb.resize(n);
    state = Eigen::VectorXd::Zero(h);
    for (size_t k = n; k-- > 0;) {
      state = (att.bwd.Wx * t.toks[k].x + att.bwd.Wh * state +
               att.bwd.b.col(0))
                  .array()
                  .tanh();
      t.hb[k] = state;
    }

    t.s.resize(n);
    t.q.resize(n);
    t.logits.resize(static_cast<int>(n));
    for (size_t i = 0; i < n; ++i) {
      Eigen::VectorXd s(2 * h);
      s.head(h) = t.hf[i];
      s.tail(h) = t.hb[i];
      t.s[i] = std::move(s);
      t.q[i] = (att.Wa * t.s[i]).array().tanh();
      t.logits(static_cast<int>(i)) = att.wa.col(0).dot(t.q[i]);
    }
    // softmax, max-shifted
    Eigen::VectorXd shifted =
        (t.logits.array() - t.logits.maxCoeff()).exp();
    t.alpha = shifted / shifted.sum();

    t.u = Eigen::VectorXd::Zero(2 * h);
    for (size_t i = 0; i < n; ++i) t.u += t.alpha(static_cast<int>(i)) * t.s[i];
    t.out = att.P * t.u;
    return t;
  }

  SegTrace forward_context(Side side, const std::vector<std::string>& tokens,
                           const std::vector<std::string>& tags) const {
    auto toks = embed(tokens, tags);
    switch (cfg.encoder) {
      case EncoderKind::averaging:
        return forward_avg(std::move(toks));
      case EncoderKind::rnn:
        return forward_rnn(std::move(toks), side == Side::left
                                                ? model.params.rnn_left
                                                : model.params.rnn_right);
      case EncoderKind::attentive:
        return forward_attentive(std::move(toks), side == Side::left
                                                      ? model.params.att_left
                                                      : model.params.att_right);
    }
    return forward_avg(std::move(toks));
  }

  // --- backward ---

  void backward_token(const TokenInput& ti, const Eigen::VectorXd& dx,
                      ModelParams& g) const {
    g.E.row(ti.word) += dx.head(cfg.d_w).transpose();
    if (cfg.use_features && !ti.tags.empty()) {
      Eigen::RowVectorXd df =
          dx.tail(cfg.d_f).transpose() / static_cast<double>(ti.tags.size());
      for (int tag : ti.tags) g.F.row(tag) += df;
    }
  }

  void backward_avg(const SegTrace& t, const Eigen::VectorXd& dout,
                    ModelParams& g) const {
    if (t.toks.empty()) return;
    Eigen::VectorXd dmean =
        dout.head(input_width()) / static_cast<double>(t.toks.size());
    for (const auto& ti : t.toks) backward_token(ti, dmean, g);
  }

  void backward_rnn(const SegTrace& t, const RnnCellParams& cell,
                    const Eigen::VectorXd& dout, RnnCellParams& gcell,
                    ModelParams& g) const {
    const size_t n = t.toks.size();
    if (n == 0) return;
    Eigen::VectorXd dh = dout;
    for (size_t i = n; i-- > 0;) {
      Eigen::VectorXd da =
          dh.array() * (1.0 - t.h[i].array().square());
      gcell.Wx += da * t.toks[i].x.transpose();
      if (i > 0)
        gcell.Wh += da * t.h[i - 1].transpose();
      gcell.b.col(0) += da;
      backward_token(t.toks[i], cell.Wx.transpose() * da, g);
      dh = cell.Wh.transpose() * da;
    }
  }

  void backward_attentive(const SegTrace& t, const AttentiveParams& att,
                          const Eigen::VectorXd& dout, AttentiveParams& gatt,
                          ModelParams& g) const {
    const size_t n = t.toks.size();
    if (n == 0) return;
    const int h = cfg.hidden;

    gatt.P += dout * t.u.transpose();
    Eigen::VectorXd du = att.P.transpose() * dout;

    // u = sum alpha_i s_i
    Eigen::VectorXd dalpha(static_cast<int>(n));
    std::vector<Eigen::VectorXd> ds(n);
    for (size_t i = 0; i < n; ++i) {
      dalpha(static_cast<int>(i)) = t.s[i].dot(du);
      ds[i] = t.alpha(static_cast<int>(i)) * du;
    }
    // softmax jacobian
    double mix = (t.alpha.array() * dalpha.array()).sum();
    Eigen::VectorXd dlogits = t.alpha.array() * (dalpha.array() - mix);

    for (size_t i = 0; i < n; ++i) {
      double dl = dlogits(static_cast<int>(i));
      gatt.wa.col(0) += dl * t.q[i];
      Eigen::VectorXd dq = dl * att.wa.col(0);
      Eigen::VectorXd dpre = dq.array() * (1.0 - t.q[i].array().square());
      gatt.Wa += dpre * t.s[i].transpose();
      ds[i] += att.Wa.transpose() * dpre;
    }

    // split into per-direction state grads and run BPTT in both cells
    std::vector<Eigen::VectorXd> dhf(n), dhb(n);
    for (size_t i = 0; i < n; ++i) {
      dhf[i] = ds[i].head(h);
      dhb[i] = ds[i].tail(h);
    }
    {
      Eigen::VectorXd carry = Eigen::VectorXd::Zero(h);
      for (size_t i = n; i-- > 0;) {
        Eigen::VectorXd total = dhf[i] + carry;
        Eigen::VectorXd da =
            total.array() * (1.0 - t.hf[i].array().square());
        gatt.fwd.Wx += da * t.toks[i].x.transpose();
        if (i > 0) gatt.fwd.Wh += da * t.hf[i - 1].transpose();
        gatt.fwd.b.col(0) += da;
        backward_token(t.toks[i], att.fwd.Wx.transpose() * da, g);
        carry = att.fwd.Wh.transpose() * da;
      }
    }
    {
      Eigen::VectorXd carry = Eigen::VectorXd::Zero(h);
      for (size_t i = 0; i < n; ++i) {
        Eigen::VectorXd total = dhb[i] + carry;
        Eigen::VectorXd da =
            total.array() * (1.0 - t.hb[i].array().square());
        gatt.bwd.Wx += da * t.toks[i].x.transpose();
        if (i + 1 < n) gatt.bwd.Wh += da * t.hb[i + 1].transpose();
        gatt.bwd.b.col(0) += da;
        backward_token(t.toks[i], att.bwd.Wx.transpose() * da, g);
        carry = att.bwd.Wh.transpose() * da;
      }
    }
  }

  void backward_context(Side side, const SegTrace& t,
                        const Eigen::VectorXd& dout, ModelParams& g) const {
    switch (cfg.encoder) {
      case EncoderKind::averaging:
        backward_avg(t, dout, g);
        break;
      case EncoderKind::rnn:
        backward_rnn(t, side == Side::left ? model.params.rnn_left
                                           : model.params.rnn_right,
                     dout, side == Side::left ? g.rnn_left : g.rnn_right, g);
        break;
      case EncoderKind::attentive:
        backward_attentive(t, side == Side::left ? model.params.att_left
                                                 : model.params.att_right,
                           dout, side == Side::left ? g.att_left : g.att_right,
                           g);
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Public encoder surface
// ---------------------------------------------------------------------------

Eigen::VectorXd ClassifierModel::encode_mention(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  if (tokens.empty()) throw EmptyMention("mention has no tokens");
  ClassifierForward fwd(*this);
  return fwd.forward_avg(fwd.embed(tokens, tags)).out;
}

Eigen::VectorXd ClassifierModel::encode_context_avg(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  ClassifierForward fwd(*this);
  return fwd.forward_avg(fwd.embed(tokens, tags)).out;
}

Eigen::VectorXd ClassifierModel::encode_context_rnn(
    Side side, const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  ClassifierForward fwd(*this);
  return fwd
      .forward_rnn(fwd.embed(tokens, tags),
                   side == Side::left ? params.rnn_left : params.rnn_right)
      .out;
}

Eigen::VectorXd ClassifierModel::encode_context_attentive(
    Side side, const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  ClassifierForward fwd(*this);
  return fwd
      .forward_attentive(fwd.embed(tokens, tags),
                         side == Side::left ? params.att_left
                                            : params.att_right)
      .out;
}

Eigen::VectorXd ClassifierModel::encode_context(
    Side side, const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  ClassifierForward fwd(*this);
  return fwd.forward_context(side, tokens, tags).out;
}

Eigen::MatrixXd ClassifierModel::birnn_states(
    Side side, const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  ClassifierForward fwd(*this);
  SegTrace t = fwd.forward_attentive(
      fwd.embed(tokens, tags),
      side == Side::left ? params.att_left : params.att_right);
  Eigen::MatrixXd out(2 * config_.hidden, static_cast<int>(t.s.size()));
  for (size_t i = 0; i < t.s.size(); ++i) out.col(static_cast<int>(i)) = t.s[i];
  return out;
}

namespace {

// Splits the flat per-token feature list into the three segment slices.
std::array<std::vector<std::string>, 3> split_tags(const MentionContext& ctx) {
  std::array<std::vector<std::string>, 3> out;
  if (ctx.features.empty()) return out;
  size_t total = ctx.left.size() + ctx.mention.size() + ctx.right.size();
  if (ctx.features.size() != total)
    throw DimensionMismatch(
        "feature tags (" + std::to_string(ctx.features.size()) +
        ") do not align with tokens (" + std::to_string(total) + ")");
  auto it = ctx.features.begin();
  out[0].assign(it, it + ctx.left.size());
  it += ctx.left.size();
  out[1].assign(it, it + ctx.mention.size());
  it += ctx.mention.size();
  out[2].assign(it, ctx.features.end());
  return out;
}

}  // namespace

Eigen::VectorXd ClassifierModel::classify(const MentionContext& ctx) const {
  auto tags = split_tags(ctx);
  ClassifierForward fwd(*this);
  SegTrace left = fwd.forward_context(Side::left, ctx.left, tags[0]);
  SegTrace right = fwd.forward_context(Side::right, ctx.right, tags[2]);
  if (ctx.mention.empty()) throw EmptyMention("mention has no tokens");
  SegTrace entity = fwd.forward_avg(fwd.embed(ctx.mention, tags[1]));

  Eigen::VectorXd v(3 * config_.D);
  v << left.out, right.out, entity.out;
  return classify_head(v, params.Wy);
}

ModelParams ClassifierModel::make_gradients() const {
  ModelParams g;
  auto like = [](const Eigen::MatrixXd& m) {
    return Eigen::MatrixXd::Zero(m.rows(), m.cols()).eval();
  };
  const ModelParams& p = params;
  g.E = like(p.E);
  if (p.F.size() > 0) g.F = like(p.F);
  g.Wy = like(p.Wy);
  auto like_cell = [&](const RnnCellParams& c, RnnCellParams& out) {
    if (c.Wx.size() == 0) return;
    out.Wx = like(c.Wx);
    out.Wh = like(c.Wh);
    out.b = like(c.b);
  };
  like_cell(p.rnn_left, g.rnn_left);
  like_cell(p.rnn_right, g.rnn_right);
  auto like_att = [&](const AttentiveParams& a, AttentiveParams& out) {
    if (a.P.size() == 0) return;
    like_cell(a.fwd, out.fwd);
    like_cell(a.bwd, out.bwd);
    out.Wa = like(a.Wa);
    out.wa = like(a.wa);
    out.P = like(a.P);
  };
  like_att(p.att_left, g.att_left);
  like_att(p.att_right, g.att_right);
  return g;
}

double ClassifierModel::loss(const TrainingExample& ex) const {
  Eigen::VectorXd y = classify(ex.ctx);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(labels_.size());
  for (size_t k = 0; k < labels_.size(); ++k)
    if (ex.labels.count(labels_[k])) t(static_cast<int>(k)) = 1.0;
  return bce_loss(y, t);
}

double ClassifierModel::loss_and_grad(const TrainingExample& ex,
                                      ModelParams& grads) const {
  auto tags = split_tags(ex.ctx);
  ClassifierForward fwd(*this);
  SegTrace left = fwd.forward_context(Side::left, ex.ctx.left, tags[0]);
  SegTrace right = fwd.forward_context(Side::right, ex.ctx.right, tags[2]);
  if (ex.ctx.mention.empty()) throw EmptyMention("mention has no tokens");
  SegTrace entity = fwd.forward_avg(fwd.embed(ex.ctx.mention, tags[1]));

  const int D = config_.D;
  Eigen::VectorXd v(3 * D);
  v << left.out, right.out, entity.out;
  Eigen::VectorXd y = classify_head(v, params.Wy);

  const int K = static_cast<int>(labels_.size());
  Eigen::VectorXd t = Eigen::VectorXd::Zero(K);
  for (int k = 0; k < K; ++k)
    if (ex.labels.count(labels_[k])) t(k) = 1.0;

  double loss = bce_loss(y, t);

  // d loss / d logits; zero where the loss is flat because of clamping.
  Eigen::VectorXd dz(K);
  for (int k = 0; k < K; ++k) {
    double yk = y(k);
    dz(k) = (yk <= kClampEps || yk >= 1.0 - kClampEps) ? 0.0 : yk - t(k);
  }

  grads.Wy += dz * v.transpose();
  Eigen::VectorXd dv = params.Wy.transpose() * dz;

  fwd.backward_context(Side::left, left, dv.segment(0, D), grads);
  fwd.backward_context(Side::right, right, dv.segment(D, D), grads);
  fwd.backward_avg(entity, dv.segment(2 * D, D), grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Head, loss, decoding, evaluation
// ---------------------------------------------------------------------------

Eigen::VectorXd classify_head(const Eigen::VectorXd& v,
                              const Eigen::MatrixXd& Wy) {
  if (v.size() != Wy.cols())
    throw DimensionMismatch("feature vector width " +
                            std::to_string(v.size()) + " vs Wy columns " +
                            std::to_string(Wy.cols()));
  Eigen::VectorXd z = Wy * v;
  Eigen::VectorXd y(z.size());
  for (int k = 0; k < z.size(); ++k) y(k) = sigmoid(z(k));
  return y;
}

double bce_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& t) {
  if (y.size() != t.size())
    throw DimensionMismatch("bce_loss: prediction/target size mismatch");
  double loss = 0.0;
  for (int k = 0; k < y.size(); ++k) {
    double yk = std::clamp(y(k), kClampEps, 1.0 - kClampEps);
    loss += -t(k) * std::log(yk) - (1.0 - t(k)) * std::log(1.0 - yk);
  }
  return loss;
}

std::set<TypePath> decode_labels(const Eigen::VectorXd& y,
                                 const std::vector<TypePath>& labels,
                                 const OntologySchema& schema,
                                 double threshold) {
  if (y.size() != static_cast<int>(labels.size()))
    throw DimensionMismatch("decode_labels: y size vs label count");
  std::set<TypePath> picked;
  int argmax = 0;
  for (int k = 0; k < y.size(); ++k) {
    if (y(k) > threshold) picked.insert(labels[k]);
    if (y(k) > y(argmax)) argmax = k;  // strict: lowest index wins ties
  }
  picked.insert(labels[argmax]);
  return expand_labels(picked, schema);
}

std::set<TypePath> ClassifierModel::decode(const Eigen::VectorXd& y,
                                           const OntologySchema& schema,
                                           double threshold) const {
  return decode_labels(y, labels_, schema, threshold);
}

EvalResult evaluate(const std::vector<std::set<TypePath>>& predictions,
                    const std::vector<std::set<TypePath>>& gold) {
  if (predictions.size() != gold.size())
    throw LengthMismatch("evaluate: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(gold.size()) +
                         " gold sets");
  double macro_sum = 0.0;
  uint64_t inter_total = 0, pred_total = 0, gold_total = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& g = gold[i];
    uint64_t inter = 0;
    for (const auto& l : p) inter += g.count(l);
    inter_total += inter;
    pred_total += p.size();
    gold_total += g.size();
    if (p.empty() && g.empty())
      macro_sum += 1.0;
    else if (p.size() + g.size() > 0)
      macro_sum += 2.0 * static_cast<double>(inter) /
                   static_cast<double>(p.size() + g.size());
  }
  EvalResult res;
  res.macro_f1 = predictions.empty() ? 1.0
                                     : macro_sum /
                                           static_cast<double>(predictions.size());
  if (pred_total + gold_total == 0) {
    res.micro_f1 = 1.0;
  } else {
    double precision =
        pred_total == 0 ? 0.0
                        : static_cast<double>(inter_total) /
                              static_cast<double>(pred_total);
    double recall = gold_total == 0 ? 0.0
                                    : static_cast<double>(inter_total) /
                                          static_cast<double>(gold_total);
    res.micro_f1 = precision + recall == 0.0
                       ? 0.0
                       : 2.0 * precision * recall / (precision + recall);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train_classifier(const std::vector<TrainingExample>& examples,
                             const OntologySchema& schema,
                             const ClassifierConfig& config) {
  if (examples.empty()) throw EmptyDataset("no training examples");

  // Ancestor-close the targets and validate labels against the schema.
  std::vector<TrainingExample> data = examples;
  for (auto& ex : data) ex.labels = expand_labels(ex.labels, schema);

  std::set<std::string> words;
  std::set<std::string> tags;
  tags.insert("NONE");
  for (TokenShape s : {TokenShape::alpha, TokenShape::capitalized,
                       TokenShape::all_caps, TokenShape::digit,
                       TokenShape::mixed, TokenShape::punct})
    tags.insert(std::string(shape_name(s)));
  std::set<TypePath> labelset;
  for (const auto& ex : data) {
    for (const auto& seg : {&ex.ctx.left, &ex.ctx.mention, &ex.ctx.right})
      for (const auto& tok : *seg) words.insert(tok);
    for (const auto& tag : ex.ctx.features)
      if (!tag.empty()) tags.insert(tag);
    labelset.insert(ex.labels.begin(), ex.labels.end());
  }

  std::vector<std::string> vocab = {"<unk>"};
  vocab.insert(vocab.end(), words.begin(), words.end());
  std::vector<std::string> feature_vocab(tags.begin(), tags.end());
  std::vector<TypePath> labels(labelset.begin(), labelset.end());

  ClassifierModel model(config, std::move(vocab), std::move(feature_vocab),
                        std::move(labels));

  if (!config.pretrained_embeddings_path.empty()) {
    auto [pre_vocab, pre_mat] =
        parse_embedding_text(read_file(config.pretrained_embeddings_path));
    if (pre_mat.cols() != config.d_w)
      throw DimensionMismatch("pretrained embedding width " +
                              std::to_string(pre_mat.cols()) +
                              " does not match d_w");
    for (size_t i = 0; i < pre_vocab.size(); ++i) {
      int idx = model.word_index(pre_vocab[i]);
      if (idx != model.word_index("<unk>") || pre_vocab[i] == "<unk>")
        model.params.E.row(idx) = pre_mat.row(static_cast<int>(i));
    }
  }

  Rng shuffle_rng(derive_seed(config.seed, "classifier-shuffle"));
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_loss;
  const size_t batch = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t pos = 0; pos < order.size(); pos += batch) {
      size_t count = std::min(batch, order.size() - pos);
      ModelParams grads = model.make_gradients();
      for (size_t k = 0; k < count; ++k)
        loss_sum += model.loss_and_grad(data[order[pos + k]], grads);
      double scale = config.lr / static_cast<double>(count);
      if (scale != 0.0) {
        std::vector<Eigen::MatrixXd*> ps, gs;
        model.params.for_each(
            [&](const std::string&, Eigen::MatrixXd& m) { ps.push_back(&m); });
        grads.for_each(
            [&](const std::string&, Eigen::MatrixXd& m) { gs.push_back(&m); });
        for (size_t i = 0; i < ps.size(); ++i) *ps[i] -= scale * *gs[i];
      }
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }
  return {std::move(model), std::move(epoch_loss)};
}

MentionContext make_context(const Sentence& sentence, size_t first_tok,
                            size_t last_tok, int window,
                            const std::vector<std::string>& per_token_tags) {
  MentionContext ctx;
  const auto& toks = sentence.tokens;
  auto tag_at = [&](size_t i) {
    return i < per_token_tags.size() && !per_token_tags[i].empty()
               ? per_token_tags[i]
               : std::string("NONE");
  };
  std::vector<std::string> tags;
  // left, nearest first
  for (size_t k = 0; k < static_cast<size_t>(window) && k < first_tok; ++k) {
    size_t i = first_tok - 1 - k;
    ctx.left.push_back(toks[i].text);
    tags.push_back(tag_at(i));
  }
  for (size_t i = first_tok; i <= last_tok && i < toks.size(); ++i) {
    ctx.mention.push_back(toks[i].text);
    tags.push_back(tag_at(i));
  }
  for (size_t i = last_tok + 1;
       i < toks.size() && i <= last_tok + static_cast<size_t>(window); ++i) {
    ctx.right.push_back(toks[i].text);
    tags.push_back(tag_at(i));
  }
  ctx.features = std::move(tags);
  return ctx;
}

std::vector<TrainingExample> examples_from_jsonl(std::string_view text,
                                                 const OntologySchema& schema) {
  std::vector<TrainingExample> out;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad training JSON line: ") + e.what());
    }
    TrainingExample ex;
    ex.ctx.left = obj.at("left").get<std::vector<std::string>>();
    ex.ctx.mention = obj.at("mention").get<std::vector<std::string>>();
    ex.ctx.right = obj.at("right").get<std::vector<std::string>>();
    if (obj.contains("features"))
      ex.ctx.features = obj.at("features").get<std::vector<std::string>>();
    std::set<TypePath> labels;
    for (const auto& l : obj.at("labels"))
      labels.insert(TypePath::parse(l.get<std::string>()));
    if (labels.empty())
      throw ValidationError("training example with no labels");
    ex.labels = expand_labels(labels, schema);
    out.push_back(std::move(ex));
  }
  return out;
}

std::string examples_to_jsonl(const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : ex.labels) labels.push_back(l.str());
    nlohmann::json obj = {{"left", ex.ctx.left},
                          {"mention", ex.ctx.mention},
                          {"right", ex.ctx.right},
                          {"features", ex.ctx.features},
                          {"labels", labels}};
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> parse_embedding_text(
    std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw ParseError("empty embedding file");
  auto header = split_ws(lines[0]);
  if (header.size() != 2)
    throw ParseError("embedding header must be '|V| d_w'");
  int v = std::stoi(header[0]);
  int d = std::stoi(header[1]);
  if (v < 0 || d <= 0) throw ParseError("bad embedding dimensions");
  std::vector<std::string> vocab;
  Eigen::MatrixXd mat(v, d);
  int row = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto fields = split_ws(lines[i]);
    if (static_cast<int>(fields.size()) != d + 1)
      throw ParseError("embedding line " + std::to_string(i + 1) +
                       ": expected token + " + std::to_string(d) + " values");
    if (row >= v) throw ParseError("more embedding rows than declared");
    vocab.push_back(fields[0]);
    for (int c = 0; c < d; ++c) mat(row, c) = std::stod(fields[c + 1]);
    ++row;
  }
  if (row != v) throw ParseError("fewer embedding rows than declared");
  return {std::move(vocab), std::move(mat)};
}

// ---------------------------------------------------------------------------
// Checkpoint format (versioned text; exact round trip via to_chars)
// ---------------------------------------------------------------------------

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

}  // namespace

void ClassifierModel::save(const std::string& path) const {
  std::string out;
  out += "ontopop-classifier 1\n";
  out += "encoder " + std::string(encoder_name(config_.encoder)) + "\n";
  out += "use_features " + std::to_string(config_.use_features ? 1 : 0) + "\n";
  out += "d_w " + std::to_string(config_.d_w) + "\n";
  out += "d_f " + std::to_string(config_.d_f) + "\n";
  out += "D " + std::to_string(config_.D) + "\n";
  out += "hidden " + std::to_string(config_.hidden) + "\n";
  out += "attention_dim " + std::to_string(config_.attention_dim) + "\n";
  out += "window " + std::to_string(config_.window) + "\n";
  out += "labels " + std::to_string(labels_.size()) + "\n";
  for (const auto& l : labels_) out += l.str() + "\n";
  out += "vocab " + std::to_string(vocab_.size()) + "\n";
  for (const auto& w : vocab_) out += w + "\n";
  out += "features " + std::to_string(feature_vocab_.size()) + "\n";
  for (const auto& f : feature_vocab_) out += f + "\n";
  params.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
    write_matrix(out, name, m);
  });
  out += "end\n";
  write_file(path, out);
}

ClassifierModel ClassifierModel::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw MissingModel("classifier checkpoint not found: " + path);
  }
  auto lines = split_lines(text);
  size_t pos = 0;
  auto next = [&]() -> const std::string& {
    if (pos >= lines.size()) throw ParseError("truncated checkpoint: " + path);
    return lines[pos++];
  };
  if (next() != "ontopop-classifier 1")
    throw ParseError("not a classifier checkpoint: " + path);

  ClassifierConfig cfg;
  auto kv = [&](const std::string& key) {
    auto fields = split_ws(next());
    if (fields.size() != 2 || fields[0] != key)
      throw ParseError("checkpoint: expected '" + key + " <value>'");
    return fields[1];
  };
  cfg.encoder = encoder_from_name(kv("encoder"));
  cfg.use_features = kv("use_features") == "1";
  cfg.d_w = std::stoi(kv("d_w"));
  cfg.d_f = std::stoi(kv("d_f"));
  cfg.D = std::stoi(kv("D"));
  cfg.hidden = std::stoi(kv("hidden"));
  cfg.attention_dim = std::stoi(kv("attention_dim"));
  cfg.window = std::stoi(kv("window"));

  size_t n_labels = std::stoul(split_ws(next()).at(1));
  std::vector<TypePath> labels;
  for (size_t i = 0; i < n_labels; ++i) labels.push_back(TypePath::parse(next()));
  size_t n_vocab = std::stoul(split_ws(next()).at(1));
  std::vector<std::string> vocab;
  for (size_t i = 0; i < n_vocab; ++i) vocab.push_back(next());
  size_t n_feat = std::stoul(split_ws(next()).at(1));
  std::vector<std::string> feats;
  for (size_t i = 0; i < n_feat; ++i) feats.push_back(next());

  ClassifierModel model(cfg, std::move(vocab), std::move(feats),
                        std::move(labels));

  std::map<std::string, Eigen::MatrixXd*> by_name;
  model.params.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
    by_name[name] = &m;
  });
  while (pos < lines.size()) {
    const std::string& line = next();
    if (line == "end") break;
    auto fields = split_ws(line);
    if (fields.size() != 4 || fields[0] != "param")
      throw ParseError("checkpoint: expected 'param <name> <rows> <cols>'");
    auto it = by_name.find(fields[1]);
    if (it == by_name.end())
      throw ParseError("checkpoint: unknown parameter " + fields[1]);
    Eigen::MatrixXd& m = *it->second;
    int rows = std::stoi(fields[2]);
    int cols = std::stoi(fields[3]);
    if (rows != m.rows() || cols != m.cols())
      throw ParseError("checkpoint: shape mismatch for " + fields[1]);
    for (int r = 0; r < rows; ++r) {
      auto vals = split_ws(next());
      if (static_cast<int>(vals.size()) != cols)
        throw ParseError("checkpoint: short row in " + fields[1]);
      for (int c = 0; c < cols; ++c) m(r, c) = std::stod(vals[c]);
    }
  }
  return model;
}

}  // namespace ontopop
