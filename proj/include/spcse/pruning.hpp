#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spcse/model.hpp"
#include "spcse/scoring.hpp"

namespace spcse {

struct SparsitySpec {
  double s = 0.0;  // fraction pruned, applied to the head pool and neuron pool independently

  void validate() const;
};

struct UnitRef {
  int layer = 0;
  int index = 0;
};

struct PruneDecision {
  MaskSet masks;
  std::vector<UnitRef> pruned_heads;
  std::vector<UnitRef> pruned_neurons;
  // Highest score among pruned units per pool; NaN when the pool prunes nothing.
  double head_threshold = std::numeric_limits<double>::quiet_NaN();
  double neuron_threshold = std::numeric_limits<double>::quiet_NaN();
  double sparsity = 0.0;
};

// Per pool: ascending sort by (score, layer, index), prune the first floor(s * pool_size).
PruneDecision select_prune_set(const ScoreTable& scores, const SparsitySpec& spec);

// Weights stay untouched; forward passes just use the decision's masks.
struct MaskedModel {
  const ModelConfig* cfg;
  const EncoderWeights* weights;
  MaskSet masks;
};

MaskedModel apply_masks(const ModelConfig& cfg, const EncoderWeights& weights,
                        const PruneDecision& decision);

// Physically removes pruned heads (their Q/K/V/O blocks) and neurons (W1 columns, b1
// entries, W2 rows); the returned config stores per-layer unit counts.
struct CompactModel {
  ModelConfig cfg;
  EncoderWeights weights;
};

CompactModel compact(const ModelConfig& cfg, const EncoderWeights& weights,
                     const PruneDecision& decision);

// CSV: "unit_type,layer,index,score,pruned" rows for every unit.
std::string decision_to_csv(const ScoreTable& scores, const PruneDecision& decision);
PruneDecision decision_from_csv(const std::string& content);
void write_decision_csv(const std::string& path, const ScoreTable& scores,
                        const PruneDecision& decision);
PruneDecision read_decision_csv(const std::string& path);

}  // namespace spcse
