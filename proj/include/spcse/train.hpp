#pragma once

#include <string>
#include <vector>

#include "spcse/data.hpp"
#include "spcse/model.hpp"

namespace spcse {

struct TrainConfig {
  double temperature = 0.05;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int pretrain_steps = 500;
  int contrastive_steps = 1000;
  int rewind_step = -1;  // -1 resolves to 10% of pretrain_steps
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 42;

  int effective_rewind_step() const {
    return rewind_step >= 0 ? rewind_step : pretrain_steps / 10;
  }
  void validate() const;
};

struct RewindCheckpoint {
  EncoderWeights weights;
  int step = 0;
  uint64_t config_hash = 0;
};

uint64_t model_config_hash(const ModelConfig& cfg);

// Adam over every weight tensor; no weight decay, so a unit whose gradients are exactly
// zero (a masked path) keeps bit-identical parameters.
class Adam {
public:
  Adam(const ModelConfig& cfg, const EncoderWeights& w);
  void step(EncoderWeights& w, const GradientSet& g, const TrainConfig& tc);

private:
  EncoderWeights m_, v_;
  int64_t t_ = 0;
};

struct TrainLog {
  std::vector<std::pair<int, double>> entries;  // (step, loss)
  std::string to_csv() const;
};

// Masked-token prediction: 15% of content tokens replaced by MASK, cross-entropy through
// the tied embedding head on masked positions. Snapshots the weights after
// effective_rewind_step() steps as the rewind target.
RewindCheckpoint pretrain_mlm(const ModelConfig& cfg, EncoderWeights& weights,
                              const std::vector<std::vector<int>>& corpus_tokens,
                              const TrainConfig& tc, TrainLog* log);

// SimCSE-style: two dropout forward passes per batch give (h, h+); InfoNCE over in-batch
// similarities. Mask entries are read, never written.
void train_contrastive(const ModelConfig& cfg, EncoderWeights& weights,
                       const std::vector<std::vector<int>>& corpus_tokens,
                       const TrainConfig& tc, const MaskSet& masks, TrainLog* log);

// Resets weights to the pretraining step-k snapshot, then retrains under pruned masks.
EncoderWeights rewind_and_retrain(const ModelConfig& cfg, const MaskSet& pruned_masks,
                                  const RewindCheckpoint& checkpoint,
                                  const std::vector<std::vector<int>>& corpus_tokens,
                                  const TrainConfig& tc, TrainLog* log);

// Tokenizes and truncates every sentence for training; empty tokenizations are dropped.
std::vector<std::vector<int>> tokenize_corpus(const SentenceCorpus& corpus,
                                              const Vocab& vocab, int max_seq_len);

}  // namespace spcse
