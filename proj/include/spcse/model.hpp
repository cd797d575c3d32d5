#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spcse/autodiff.hpp"
#include "spcse/common.hpp"
#include "spcse/data.hpp"

namespace spcse {

inline constexpr real kLayerNormEps = real(1e-5);

struct ModelConfig {
  int vocab_size = 2000;
  int max_seq_len = 32;
  int hidden_dim = 64;    // d
  int num_layers = 2;     // L
  int heads_per_layer = 4;  // N_H
  int head_dim = 16;      // d_A
  int ffn_dim = 256;      // D_F
  double dropout_rate = 0.1;
  uint64_t seed = 42;

  // Per-layer unit counts after physical compaction; empty means uniform
  // (heads_per_layer / ffn_dim everywhere).
  std::vector<int> layer_heads;
  std::vector<int> layer_ffn;

  int heads(int layer) const {
    return layer_heads.empty() ? heads_per_layer : layer_heads[size_t(layer)];
  }
  int ffn(int layer) const {
    return layer_ffn.empty() ? ffn_dim : layer_ffn[size_t(layer)];
  }
  bool compacted() const { return !layer_heads.empty() || !layer_ffn.empty(); }

  void validate() const;
};

struct HeadWeights {
  Mat wq, wk, wv;  // d x d_A
  Mat wo;          // d_A x d
  Mat bq, bk, bv;  // 1 x d_A
  Mat bo;          // 1 x d
};

struct LayerWeights {
  std::vector<HeadWeights> heads;
  Mat w1;  // d x D_F
  Mat b1;  // 1 x D_F
  Mat w2;  // D_F x d
  Mat b2;  // 1 x d
  Mat ln1_gamma, ln1_beta;  // 1 x d
  Mat ln2_gamma, ln2_beta;  // 1 x d
};

struct EncoderWeights {
  Mat token_embedding;     // vocab x d
  Mat position_embedding;  // max_seq_len x d
  std::vector<LayerWeights> layers;
};

// Walks every tensor in a fixed order with its canonical name; the same order backs
// serialization, optimizer state, and equality checks.
void for_each_tensor(EncoderWeights& w,
                     const std::function<void(const std::string&, Mat&)>& fn);
void for_each_tensor(const EncoderWeights& w,
                     const std::function<void(const std::string&, const Mat&)>& fn);

int64_t param_count(const EncoderWeights& w);
bool weights_equal(const EncoderWeights& a, const EncoderWeights& b);

struct MaskSet {
  std::vector<Mat> head_masks;    // per layer, 1 x heads(l)
  std::vector<Mat> neuron_masks;  // per layer, 1 x ffn(l)

  static MaskSet full(const ModelConfig& cfg);  // all ones
  bool all_ones() const;
  bool shape_matches(const ModelConfig& cfg) const;
};

struct GradientSet {
  EncoderWeights weights;              // gradient per weight tensor
  std::vector<Mat> head_mask_grads;    // per layer, 1 x heads(l)
  std::vector<Mat> neuron_mask_grads;  // per layer, 1 x ffn(l)

  static GradientSet zeros_like(const ModelConfig& cfg, const EncoderWeights& w);
  void set_zero();
};

EncoderWeights init_model(const ModelConfig& cfg);

// One encoder forward recorded on a tape. The flat token stream is the concatenation of
// [CLS, tokens...] per sentence; attention runs per sentence on slices of it.
struct EncodeGraph {
  ad::Var cls = nullptr;         // batch x d final-layer CLS states
  ad::Var all_tokens = nullptr;  // total_tokens x d final-layer states
  ad::Var token_embedding_leaf = nullptr;  // for the tied masked-token head
  std::vector<int> sentence_offsets;
  std::vector<int> sentence_lengths;
};

// masks == nullptr selects the code path with no masking operations at all (used to verify
// that all-ones masks are a bit-exact identity). sinks == nullptr discards gradients.
EncodeGraph build_encode(ad::Tape& tape, const ModelConfig& cfg, const EncoderWeights& w,
                         const MaskSet* masks, const std::vector<std::vector<int>>& batch,
                         bool dropout_on, uint64_t dropout_seed, GradientSet* sinks);

// CLS-pooled sentence embeddings (batch x d).
Mat forward_embed(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                  const std::vector<std::vector<int>>& batch, bool dropout_on,
                  uint64_t dropout_seed);

// Standalone value-level blocks operating on one layer (no residual, no layer norm),
// matching the masked-sum definitions directly.
Mat masked_mha(const Mat& x, const LayerWeights& lw, const Mat& head_masks);
Mat masked_ffn(const Mat& a, const LayerWeights& lw, const Mat& neuron_masks);

// One head's standalone contribution xi=1 (scaled dot-product attention + output slice).
Mat single_head_attention(const Mat& x, const HeadWeights& hw);

}  // namespace spcse
