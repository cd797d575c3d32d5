#include "spcse/train.hpp"

#include <cmath>
#include <sstream>

namespace spcse {

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) raise(ErrorKind::Config, "train.temperature must be positive");
  if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "train.learning_rate must be positive");
  if (batch_size < 2)
    raise(ErrorKind::Config, "train.batch_size must be at least 2 for in-batch negatives");
  if (pretrain_steps <= 0 || contrastive_steps <= 0)
    raise(ErrorKind::Config, "train step counts must be positive");
  if (rewind_step >= pretrain_steps)
    raise(ErrorKind::Config, "train.rewind_step must be smaller than pretrain_steps");
  if (rewind_step < -1)
    raise(ErrorKind::Config, "train.rewind_step must be non-negative (or -1 for the default)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    raise(ErrorKind::Config, "adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) raise(ErrorKind::Config, "adam_eps must be positive");
}

uint64_t model_config_hash(const ModelConfig& cfg) {
  std::ostringstream s;
  s << "v=" << cfg.vocab_size << ";l=" << cfg.max_seq_len << ";d=" << cfg.hidden_dim
    << ";L=" << cfg.num_layers << ";H=" << cfg.heads_per_layer << ";dA=" << cfg.head_dim
    << ";F=" << cfg.ffn_dim << ";p=" << format_real(cfg.dropout_rate)
    << ";seed=" << cfg.seed;
  s << ";lh=";
  for (int h : cfg.layer_heads) s << h << ",";
  s << ";lf=";
  for (int f : cfg.layer_ffn) s << f << ",";
  return fnv1a64(s.str());
}

namespace {

std::vector<Mat*> tensor_list(EncoderWeights& w) {
  std::vector<Mat*> out;
  for_each_tensor(w, [&](const std::string&, Mat& m) { out.push_back(&m); });
  return out;
}

std::vector<const Mat*> tensor_list(const EncoderWeights& w) {
  std::vector<const Mat*> out;
  for_each_tensor(w, [&](const std::string&, const Mat& m) { out.push_back(&m); });
  return out;
}

// Sequential batch supply; reshuffles with a fresh epoch seed whenever exhausted.
class BatchStream {
public:
  BatchStream(int count, int batch_size, uint64_t seed, uint64_t stream_salt)
      : count_(count), batch_size_(batch_size), seed_(seed), salt_(stream_salt) {}

  const std::vector<int>& next() {
    if (cursor_ >= batches_.size()) {
      batches_ = make_batches(count_, batch_size_, derive_seed(seed_, salt_, epoch_++));
      cursor_ = 0;
    }
    return batches_[cursor_++];
  }

private:
  int count_, batch_size_;
  uint64_t seed_, salt_;
  uint64_t epoch_ = 0;
  size_t cursor_ = 0;
  std::vector<std::vector<int>> batches_;
};

constexpr uint64_t kSaltPretrainEpoch = 0x70726574ull;   // distinct stream salts
constexpr uint64_t kSaltPretrainMask = 0x6d61736bull;
constexpr uint64_t kSaltPretrainDrop = 0x64726f70ull;
constexpr uint64_t kSaltContrastEpoch = 0x636f6e74ull;
constexpr uint64_t kSaltContrastDrop = 0x63647270ull;

}  // namespace

Adam::Adam(const ModelConfig& cfg, const EncoderWeights& w) {
  m_ = w;
  v_ = w;
  for_each_tensor(m_, [](const std::string&, Mat& m) { m.setZero(); });
  for_each_tensor(v_, [](const std::string&, Mat& m) { m.setZero(); });
  (void)cfg;
}

void Adam::step(EncoderWeights& w, const GradientSet& g, const TrainConfig& tc) {
  ++t_;
  auto wt = tensor_list(w);
  auto gt = tensor_list(g.weights);
  auto mt = tensor_list(m_);
  auto vt = tensor_list(v_);
  if (wt.size() != gt.size() || wt.size() != mt.size())
    raise(ErrorKind::Shape, "adam: structure mismatch between weights and gradients");
  const real b1 = real(tc.adam_beta1);
  const real b2 = real(tc.adam_beta2);
  const real eps = real(tc.adam_eps);
  const real bc1 = real(1.0 - std::pow(tc.adam_beta1, double(t_)));
  const real bc2 = real(1.0 - std::pow(tc.adam_beta2, double(t_)));
  const real lr = real(tc.learning_rate);
  for (size_t i = 0; i < wt.size(); ++i) {
    Mat& m = *mt[i];
    Mat& v = *vt[i];
    const Mat& grad = *gt[i];
    m = b1 * m + (real(1) - b1) * grad;
    v = (b2 * v.array() + (real(1) - b2) * grad.array().square()).matrix();
    *wt[i] -= (lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps)).matrix();
  }
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "step,loss\n";
  for (const auto& [step, loss] : entries) out << step << "," << format_real(loss) << "\n";
  return out.str();
}

std::vector<std::vector<int>> tokenize_corpus(const SentenceCorpus& corpus,
                                              const Vocab& vocab, int max_seq_len) {
  std::vector<std::vector<int>> tokens;
  tokens.reserve(corpus.sentences.size());
  for (const std::string& s : corpus.sentences) {
    std::vector<int> ids = tokenize(s, vocab);
    if (ids.empty()) continue;
    if (int(ids.size()) > max_seq_len - 1) ids.resize(size_t(max_seq_len - 1));
    tokens.push_back(std::move(ids));
  }
  if (tokens.empty()) raise(ErrorKind::Data, "corpus has no tokenizable sentences");
  return tokens;
}

RewindCheckpoint pretrain_mlm(const ModelConfig& cfg, EncoderWeights& weights,
                              const std::vector<std::vector<int>>& corpus_tokens,
                              const TrainConfig& tc, TrainLog* log) {
  tc.validate();
  const int k = tc.effective_rewind_step();
  RewindCheckpoint ckpt;
  ckpt.config_hash = model_config_hash(cfg);
  if (k == 0) {
    ckpt.weights = weights;
    ckpt.step = 0;
  }

  Adam adam(cfg, weights);
  GradientSet grads = GradientSet::zeros_like(cfg, weights);
  BatchStream stream(int(corpus_tokens.size()), tc.batch_size, tc.seed, kSaltPretrainEpoch);

  for (int step = 1; step <= tc.pretrain_steps; ++step) {
    const std::vector<int>& batch_idx = stream.next();
    std::vector<std::vector<int>> batch;
    batch.reserve(batch_idx.size());
    for (int i : batch_idx) batch.push_back(corpus_tokens[size_t(i)]);

    // Corruption: each content token independently becomes MASK with probability 0.15.
    Rng mask_rng(derive_seed(tc.seed, kSaltPretrainMask, uint64_t(step)));
    std::vector<int> masked_flat_pos;
    std::vector<int> masked_targets;
    int flat = 0;
    for (auto& sent : batch) {
      ++flat;  // CLS slot
      for (int& id : sent) {
        if (mask_rng.uniform01() < 0.15) {
          masked_flat_pos.push_back(flat);
          masked_targets.push_back(id);
          id = kMaskId;
        }
        ++flat;
      }
    }
    if (masked_flat_pos.empty()) {
      masked_flat_pos.push_back(1);  // first content token of the first sentence
      masked_targets.push_back(batch[0][0]);
      batch[0][0] = kMaskId;
    }

    ad::Tape tape;
    grads.set_zero();
    EncodeGraph g = build_encode(tape, cfg, weights, nullptr, batch, true,
                                 derive_seed(tc.seed, kSaltPretrainDrop, uint64_t(step)),
                                 &grads);
    ad::Var hidden = ad::rows(tape, g.all_tokens, masked_flat_pos);
    ad::Var logits = ad::matmul_nt(tape, hidden, g.token_embedding_leaf, real(1));
    ad::Var loss = ad::softmax_xent_rows(tape, logits, masked_targets);
    double loss_value = double(loss->val(0, 0));
    tape.backward(loss);
    adam.step(weights, grads, tc);

    if (log) log->entries.emplace_back(step, loss_value);
    if (step == k) {
      ckpt.weights = weights;
      ckpt.step = step;
    }
    if (step % 100 == 0)
      log_info("pretrain step " + std::to_string(step) + " loss " + format_real(loss_value));
  }
  return ckpt;
}

void train_contrastive(const ModelConfig& cfg, EncoderWeights& weights,
                       const std::vector<std::vector<int>>& corpus_tokens,
                       const TrainConfig& tc, const MaskSet& masks, TrainLog* log) {
  tc.validate();
  if (!masks.shape_matches(cfg))
    raise(ErrorKind::Shape, "train_contrastive: mask shapes do not match the config");

  Adam adam(cfg, weights);
  GradientSet grads = GradientSet::zeros_like(cfg, weights);
  BatchStream stream(int(corpus_tokens.size()), tc.batch_size, tc.seed, kSaltContrastEpoch);

  for (int step = 1; step <= tc.contrastive_steps; ++step) {
    const std::vector<int>& batch_idx = stream.next();
    std::vector<std::vector<int>> batch;
    batch.reserve(batch_idx.size());
    for (int i : batch_idx) batch.push_back(corpus_tokens[size_t(i)]);

    ad::Tape tape;
    grads.set_zero();
    EncodeGraph ga = build_encode(tape, cfg, weights, &masks, batch, true,
                                  derive_seed(tc.seed, kSaltContrastDrop, uint64_t(step) * 2),
                                  &grads);
    EncodeGraph gb =
        build_encode(tape, cfg, weights, &masks, batch, true,
                     derive_seed(tc.seed, kSaltContrastDrop, uint64_t(step) * 2 + 1), &grads);
    ad::Var h = ad::row_normalize(tape, ga.cls);
    ad::Var hplus = ad::row_normalize(tape, gb.cls);
    ad::Var logits = ad::matmul_nt(tape, h, hplus, real(1.0 / tc.temperature));
    ad::Var loss = ad::softmax_xent_diag(tape, logits);
    double loss_value = double(loss->val(0, 0));
    tape.backward(loss);
    adam.step(weights, grads, tc);

    if (log) log->entries.emplace_back(step, loss_value);
    if (step % 100 == 0)
      log_info("contrastive step " + std::to_string(step) + " loss " +
               format_real(loss_value));
  }
}

EncoderWeights rewind_and_retrain(const ModelConfig& cfg, const MaskSet& pruned_masks,
                                  const RewindCheckpoint& checkpoint,
                                  const std::vector<std::vector<int>>& corpus_tokens,
                                  const TrainConfig& tc, TrainLog* log) {
  if (checkpoint.config_hash != model_config_hash(cfg))
    raise(ErrorKind::Compatibility,
          "rewind: checkpoint was produced under a different model config (hash " +
              std::to_string(checkpoint.config_hash) + " vs " +
              std::to_string(model_config_hash(cfg)) + ")");
  EncoderWeights weights = checkpoint.weights;
  train_contrastive(cfg, weights, corpus_tokens, tc, pruned_masks, log);
  return weights;
}

}  // namespace spcse
