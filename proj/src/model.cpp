#include "spcse/model.hpp"

#include <cmath>
#include <cstring>

namespace spcse {

void ModelConfig::validate() const {
  if (vocab_size <= kUnkId + 1)
    raise(ErrorKind::Config, "vocab_size must exceed the 4 reserved ids");
  if (max_seq_len < 2)
    raise(ErrorKind::Config, "max_seq_len must be at least 2 (CLS + one content token)");
  if (hidden_dim <= 0 || num_layers <= 0 || heads_per_layer <= 0 || head_dim <= 0 ||
      ffn_dim <= 0)
    raise(ErrorKind::Config, "model dimensions must be positive");
  if (hidden_dim != heads_per_layer * head_dim)
    raise(ErrorKind::Config,
          "hidden_dim must equal heads_per_layer * head_dim (" +
              std::to_string(hidden_dim) + " != " + std::to_string(heads_per_layer) + " * " +
              std::to_string(head_dim) + ")");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    raise(ErrorKind::Config, "dropout_rate must lie in [0, 1)");
  if (!layer_heads.empty() && int(layer_heads.size()) != num_layers)
    raise(ErrorKind::Config, "layer_heads must list one head count per layer");
  if (!layer_ffn.empty() && int(layer_ffn.size()) != num_layers)
    raise(ErrorKind::Config, "layer_ffn must list one neuron count per layer");
  for (int h : layer_heads)
    if (h < 0) raise(ErrorKind::Config, "per-layer head count must be non-negative");
  for (int f : layer_ffn)
    if (f < 0) raise(ErrorKind::Config, "per-layer neuron count must be non-negative");
}

namespace {

template <typename W, typename Fn>
void walk_tensors(W& w, const Fn& fn) {
  fn("token_embedding", w.token_embedding);
  fn("position_embedding", w.position_embedding);
  for (size_t l = 0; l < w.layers.size(); ++l) {
    auto& lw = w.layers[l];
    std::string lp = "layer" + std::to_string(l) + ".";
    for (size_t h = 0; h < lw.heads.size(); ++h) {
      auto& hw = lw.heads[h];
      std::string hp = lp + "head" + std::to_string(h) + ".";
      fn(hp + "wq", hw.wq);
      fn(hp + "bq", hw.bq);
      fn(hp + "wk", hw.wk);
      fn(hp + "bk", hw.bk);
      fn(hp + "wv", hw.wv);
      fn(hp + "bv", hw.bv);
      fn(hp + "wo", hw.wo);
      fn(hp + "bo", hw.bo);
    }
    fn(lp + "ffn.w1", lw.w1);
    fn(lp + "ffn.b1", lw.b1);
    fn(lp + "ffn.w2", lw.w2);
    fn(lp + "ffn.b2", lw.b2);
    fn(lp + "ln1.gamma", lw.ln1_gamma);
    fn(lp + "ln1.beta", lw.ln1_beta);
    fn(lp + "ln2.gamma", lw.ln2_gamma);
    fn(lp + "ln2.beta", lw.ln2_beta);
  }
}

Mat fill_truncated_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = real(rng.truncated_normal(sigma));
  return m;
}

Mat dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, real rate) {
  Mat m(rows, cols);
  real keep_scale = real(1) / (real(1) - rate);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = rng.uniform01() < double(rate) ? real(0) : keep_scale;
  return m;
}

void softmax_rows_inplace(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    real mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

void for_each_tensor(EncoderWeights& w,
                     const std::function<void(const std::string&, Mat&)>& fn) {
  walk_tensors(w, fn);
}

void for_each_tensor(const EncoderWeights& w,
                     const std::function<void(const std::string&, const Mat&)>& fn) {
  walk_tensors(w, fn);
}

int64_t param_count(const EncoderWeights& w) {
  int64_t n = 0;
  for_each_tensor(w, [&](const std::string&, const Mat& m) { n += m.size(); });
  return n;
}

bool weights_equal(const EncoderWeights& a, const EncoderWeights& b) {
  if (a.layers.size() != b.layers.size()) return false;
  bool equal = true;
  std::vector<const Mat*> bt;
  for_each_tensor(b, [&](const std::string&, const Mat& m) { bt.push_back(&m); });
  size_t i = 0;
  for_each_tensor(a, [&](const std::string&, const Mat& m) {
    if (!equal) return;
    if (i >= bt.size() || m.rows() != bt[i]->rows() || m.cols() != bt[i]->cols() ||
        std::memcmp(m.data(), bt[i]->data(), sizeof(real) * size_t(m.size())) != 0)
      equal = false;
    ++i;
  });
  return equal && i == bt.size();
}

MaskSet MaskSet::full(const ModelConfig& cfg) {
  MaskSet m;
  for (int l = 0; l < cfg.num_layers; ++l) {
    m.head_masks.push_back(Mat::Ones(1, cfg.heads(l)));
    m.neuron_masks.push_back(Mat::Ones(1, cfg.ffn(l)));
  }
  return m;
}

bool MaskSet::all_ones() const {
  for (const Mat& m : head_masks)
    if ((m.array() != real(1)).any()) return false;
  for (const Mat& m : neuron_masks)
    if ((m.array() != real(1)).any()) return false;
  return true;
}

bool MaskSet::shape_matches(const ModelConfig& cfg) const {
  if (int(head_masks.size()) != cfg.num_layers ||
      int(neuron_masks.size()) != cfg.num_layers)
    return false;
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (head_masks[size_t(l)].rows() != 1 ||
        head_masks[size_t(l)].cols() != cfg.heads(l))
      return false;
    if (neuron_masks[size_t(l)].rows() != 1 ||
        neuron_masks[size_t(l)].cols() != cfg.ffn(l))
      return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const ModelConfig& cfg, const EncoderWeights& w) {
  GradientSet g;
  g.weights = w;
  for_each_tensor(g.weights, [](const std::string&, Mat& m) { m.setZero(); });
  for (int l = 0; l < cfg.num_layers; ++l) {
    g.head_mask_grads.push_back(Mat::Zero(1, cfg.heads(l)));
    g.neuron_mask_grads.push_back(Mat::Zero(1, cfg.ffn(l)));
  }
  return g;
}

void GradientSet::set_zero() {
  for_each_tensor(weights, [](const std::string&, Mat& m) { m.setZero(); });
  for (Mat& m : head_mask_grads) m.setZero();
  for (Mat& m : neuron_mask_grads) m.setZero();
}

EncoderWeights init_model(const ModelConfig& cfg) {
  cfg.validate();
  constexpr double sigma = 0.02;
  Rng rng(cfg.seed);
  EncoderWeights w;
  w.token_embedding = fill_truncated_normal(rng, cfg.vocab_size, cfg.hidden_dim, sigma);
  w.position_embedding =
      fill_truncated_normal(rng, cfg.max_seq_len, cfg.hidden_dim, sigma);
  for (int l = 0; l < cfg.num_layers; ++l) {
    LayerWeights lw;
    for (int h = 0; h < cfg.heads(l); ++h) {
      HeadWeights hw;
      hw.wq = fill_truncated_normal(rng, cfg.hidden_dim, cfg.head_dim, sigma);
      hw.wk = fill_truncated_normal(rng, cfg.hidden_dim, cfg.head_dim, sigma);
      hw.wv = fill_truncated_normal(rng, cfg.hidden_dim, cfg.head_dim, sigma);
      hw.wo = fill_truncated_normal(rng, cfg.head_dim, cfg.hidden_dim, sigma);
      hw.bq = Mat::Zero(1, cfg.head_dim);
      hw.bk = Mat::Zero(1, cfg.head_dim);
      hw.bv = Mat::Zero(1, cfg.head_dim);
      hw.bo = Mat::Zero(1, cfg.hidden_dim);
      lw.heads.push_back(std::move(hw));
    }
    lw.w1 = fill_truncated_normal(rng, cfg.hidden_dim, cfg.ffn(l), sigma);
    lw.b1 = Mat::Zero(1, cfg.ffn(l));
    lw.w2 = fill_truncated_normal(rng, cfg.ffn(l), cfg.hidden_dim, sigma);
    lw.b2 = Mat::Zero(1, cfg.hidden_dim);
    lw.ln1_gamma = Mat::Ones(1, cfg.hidden_dim);
    lw.ln1_beta = Mat::Zero(1, cfg.hidden_dim);
    lw.ln2_gamma = Mat::Ones(1, cfg.hidden_dim);
    lw.ln2_beta = Mat::Zero(1, cfg.hidden_dim);
    w.layers.push_back(std::move(lw));
  }
  return w;
}

EncodeGraph build_encode(ad::Tape& tape, const ModelConfig& cfg, const EncoderWeights& w,
                         const MaskSet* masks, const std::vector<std::vector<int>>& batch,
                         bool dropout_on, uint64_t dropout_seed, GradientSet* sinks) {
  if (batch.empty()) raise(ErrorKind::Input, "forward: empty batch");
  if (masks && !masks->shape_matches(cfg))
    raise(ErrorKind::Shape, "forward: mask shapes do not match the model config");

  EncodeGraph g;
  std::vector<int> flat_ids, flat_pos;
  for (size_t s = 0; s < batch.size(); ++s) {
    const auto& sent = batch[s];
    if (sent.empty())
      raise(ErrorKind::Input, "forward: empty token sequence at batch index " +
                                  std::to_string(s));
    size_t content = std::min(sent.size(), size_t(cfg.max_seq_len - 1));
    g.sentence_offsets.push_back(int(flat_ids.size()));
    g.sentence_lengths.push_back(int(content) + 1);
    flat_ids.push_back(kClsId);
    flat_pos.push_back(0);
    for (size_t i = 0; i < content; ++i) {
      int id = sent[i];
      if (id < 0 || id >= cfg.vocab_size)
        raise(ErrorKind::Vocabulary,
              "forward: token id " + std::to_string(id) + " outside vocabulary of size " +
                  std::to_string(cfg.vocab_size));
      flat_ids.push_back(id);
      flat_pos.push_back(int(i) + 1);
    }
  }

  const int total = int(flat_ids.size());
  Rng drop_rng(dropout_seed);
  const real rate = real(cfg.dropout_rate);
  const bool drop = dropout_on && rate > real(0);

  ad::Var emb = ad::leaf(tape, w.token_embedding, sinks ? &sinks->weights.token_embedding : nullptr);
  g.token_embedding_leaf = emb;
  ad::Var pos = ad::leaf(tape, w.position_embedding,
                         sinks ? &sinks->weights.position_embedding : nullptr);
  ad::Var x = ad::add(tape, ad::rows(tape, emb, flat_ids), ad::rows(tape, pos, flat_pos));

  for (int l = 0; l < cfg.num_layers; ++l) {
    const LayerWeights& lw = w.layers[size_t(l)];
    LayerWeights* gl = sinks ? &sinks->weights.layers[size_t(l)] : nullptr;
    const int n_heads = cfg.heads(l);
    const real att_scale = real(1.0 / std::sqrt(double(cfg.head_dim)));

    std::vector<ad::Var> head_outs;
    for (int h = 0; h < n_heads; ++h) {
      const HeadWeights& hw = lw.heads[size_t(h)];
      HeadWeights* gh = gl ? &gl->heads[size_t(h)] : nullptr;
      ad::Var q = ad::add_row_vector(
          tape, ad::matmul(tape, x, ad::leaf(tape, hw.wq, gh ? &gh->wq : nullptr)),
          ad::leaf(tape, hw.bq, gh ? &gh->bq : nullptr));
      ad::Var k = ad::add_row_vector(
          tape, ad::matmul(tape, x, ad::leaf(tape, hw.wk, gh ? &gh->wk : nullptr)),
          ad::leaf(tape, hw.bk, gh ? &gh->bk : nullptr));
      ad::Var v = ad::add_row_vector(
          tape, ad::matmul(tape, x, ad::leaf(tape, hw.wv, gh ? &gh->wv : nullptr)),
          ad::leaf(tape, hw.bv, gh ? &gh->bv : nullptr));

      std::vector<ad::Var> ctx_parts;
      for (size_t s = 0; s < batch.size(); ++s) {
        int off = g.sentence_offsets[s];
        int len = g.sentence_lengths[s];
        ad::Var qs = ad::slice_rows(tape, q, off, len);
        ad::Var ks = ad::slice_rows(tape, k, off, len);
        ad::Var vs = ad::slice_rows(tape, v, off, len);
        ad::Var probs = ad::softmax_rows(tape, ad::matmul_nt(tape, qs, ks, att_scale));
        if (drop) probs = ad::mul_const(tape, probs, dropout_mask(drop_rng, len, len, rate));
        ctx_parts.push_back(ad::matmul(tape, probs, vs));
      }
      ad::Var ctx = ad::concat_rows(tape, ctx_parts);
      head_outs.push_back(ad::add_row_vector(
          tape, ad::matmul(tape, ctx, ad::leaf(tape, hw.wo, gh ? &gh->wo : nullptr)),
          ad::leaf(tape, hw.bo, gh ? &gh->bo : nullptr)));
    }

    ad::Var attn_in = x;
    if (!head_outs.empty()) {
      ad::Var mha;
      if (masks) {
        ad::Var xi = ad::leaf(tape, masks->head_masks[size_t(l)],
                              sinks ? &sinks->head_mask_grads[size_t(l)] : nullptr);
        mha = ad::scale_sum(tape, head_outs, xi);
      } else {
        mha = head_outs[0];
        for (size_t h = 1; h < head_outs.size(); ++h) mha = ad::add(tape, mha, head_outs[h]);
      }
      attn_in = ad::add(tape, x, mha);
    }
    ad::Var attn =
        ad::layer_norm_rows(tape, attn_in,
                            ad::leaf(tape, lw.ln1_gamma, gl ? &gl->ln1_gamma : nullptr),
                            ad::leaf(tape, lw.ln1_beta, gl ? &gl->ln1_beta : nullptr),
                            kLayerNormEps);

    ad::Var ffn_out;
    if (cfg.ffn(l) > 0) {
      ad::Var z = ad::add_row_vector(
          tape, ad::matmul(tape, attn, ad::leaf(tape, lw.w1, gl ? &gl->w1 : nullptr)),
          ad::leaf(tape, lw.b1, gl ? &gl->b1 : nullptr));
      ad::Var a = ad::gelu(tape, z);
      if (drop)
        a = ad::mul_const(tape, a, dropout_mask(drop_rng, total, cfg.ffn(l), rate));
      if (masks)
        a = ad::mul_row_broadcast(
            tape, a,
            ad::leaf(tape, masks->neuron_masks[size_t(l)],
                     sinks ? &sinks->neuron_mask_grads[size_t(l)] : nullptr));
      ffn_out = ad::add_row_vector(
          tape, ad::matmul(tape, a, ad::leaf(tape, lw.w2, gl ? &gl->w2 : nullptr)),
          ad::leaf(tape, lw.b2, gl ? &gl->b2 : nullptr));
    } else {
      ffn_out = ad::add_row_vector(tape, ad::leaf(tape, Mat::Zero(total, cfg.hidden_dim), nullptr),
                                   ad::leaf(tape, lw.b2, gl ? &gl->b2 : nullptr));
    }
    x = ad::layer_norm_rows(tape, ad::add(tape, attn, ffn_out),
                            ad::leaf(tape, lw.ln2_gamma, gl ? &gl->ln2_gamma : nullptr),
                            ad::leaf(tape, lw.ln2_beta, gl ? &gl->ln2_beta : nullptr),
                            kLayerNormEps);
  }

  g.all_tokens = x;
  g.cls = ad::rows(tape, x, g.sentence_offsets);
  return g;
}

Mat forward_embed(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                  const std::vector<std::vector<int>>& batch, bool dropout_on,
                  uint64_t dropout_seed) {
  ad::Tape tape;
  EncodeGraph g = build_encode(tape, cfg, w, masks, batch, dropout_on, dropout_seed, nullptr);
  Mat out = g.cls->val;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      if (!std::isfinite(out(r, c)))
        raise(ErrorKind::Numeric, "forward: non-finite embedding entry");
  return out;
}

Mat single_head_attention(const Mat& x, const HeadWeights& hw) {
  if (x.cols() != hw.wq.rows()) raise(ErrorKind::Shape, "attention: input width mismatch");
  Mat q = (x * hw.wq).rowwise() + hw.bq.row(0);
  Mat k = (x * hw.wk).rowwise() + hw.bk.row(0);
  Mat v = (x * hw.wv).rowwise() + hw.bv.row(0);
  Mat scores = q * k.transpose() * real(1.0 / std::sqrt(double(hw.wq.cols())));
  softmax_rows_inplace(scores);
  Mat ctx = scores * v;
  return (ctx * hw.wo).rowwise() + hw.bo.row(0);
}

Mat masked_mha(const Mat& x, const LayerWeights& lw, const Mat& head_masks) {
  if (head_masks.rows() != 1 || head_masks.cols() != Eigen::Index(lw.heads.size()))
    raise(ErrorKind::Shape, "masked_mha: head mask length must equal the head count");
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (size_t h = 0; h < lw.heads.size(); ++h)
    out += head_masks(0, Eigen::Index(h)) * single_head_attention(x, lw.heads[h]);
  return out;
}

Mat masked_ffn(const Mat& a, const LayerWeights& lw, const Mat& neuron_masks) {
  if (a.cols() != lw.w1.rows()) raise(ErrorKind::Shape, "masked_ffn: input width mismatch");
  if (neuron_masks.rows() != 1 || neuron_masks.cols() != lw.w1.cols())
    raise(ErrorKind::Shape, "masked_ffn: neuron mask length must equal the FFN width");
  Mat z = (a * lw.w1).rowwise() + lw.b1.row(0);
  Mat act = z.unaryExpr([](real v) { return ad::gelu_scalar(v); });
  act = act.array().rowwise() * neuron_masks.row(0).array();
  return (act * lw.w2).rowwise() + lw.b2.row(0);
}

}  // namespace spcse
