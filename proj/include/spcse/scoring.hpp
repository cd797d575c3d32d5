#pragma once

#include <string>
#include <vector>

#include "spcse/data.hpp"
#include "spcse/model.hpp"

namespace spcse {

struct ScoreConfig {
  double lambda = 0.5;
  int batch_size = 32;
  bool normalize_embeddings = true;
  double eps_log = 1e-12;

  void validate() const;
};

// Expected-absolute-gradient importance per maskable unit, double precision.
struct ScoreTable {
  std::vector<std::vector<double>> head_scores;    // [layer][head]
  std::vector<std::vector<double>> neuron_scores;  // [layer][neuron]
  double lambda = 0.5;
  int batch_count = 0;
  std::string dataset;
};

// For each scoring batch: embed both sides of every pair with dropout off, compute
// lambda * alignment + (1 - lambda) * uniformity over the batch (uniformity over all
// embeddings, alignment over the (a, b) pairs), backpropagate, and take per-unit
// absolute mask gradients; the score is the mean of those absolute values over batches.
// Masks must be all ones.
ScoreTable estimate_importance(const ModelConfig& cfg, const EncoderWeights& weights,
                               const MaskSet& masks, const ScoredPairSet& pairs,
                               const Vocab& vocab, const ScoreConfig& sc);

// CSV: header "unit_type,layer,index,score" behind '#' metadata comment lines.
std::string score_table_to_csv(const ScoreTable& table);
ScoreTable score_table_from_csv(const std::string& content);
void write_score_csv(const std::string& path, const ScoreTable& table);
ScoreTable read_score_csv(const std::string& path);

}  // namespace spcse
