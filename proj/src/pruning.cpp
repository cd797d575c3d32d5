#include "spcse/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spcse {

void SparsitySpec::validate() const {
  if (!(s >= 0.0 && s < 1.0))
    raise(ErrorKind::Config, "sparsity must lie in [0, 1), got " + format_real(s));
}

namespace {

struct RankedUnit {
  double score;
  int layer;
  int index;
};

// Marks the floor(s * pool) lowest-(score, layer, index) units in the per-layer masks.
std::vector<UnitRef> prune_pool(const std::vector<std::vector<double>>& scores, double s,
                                std::vector<Mat>& masks, double& threshold) {
  std::vector<RankedUnit> units;
  for (size_t l = 0; l < scores.size(); ++l)
    for (size_t i = 0; i < scores[l].size(); ++i) {
      double v = scores[l][i];
      if (!std::isfinite(v) || v < 0.0)
        raise(ErrorKind::Data, "prune: scores must be finite and non-negative");
      units.push_back({v, int(l), int(i)});
    }
  std::sort(units.begin(), units.end(), [](const RankedUnit& a, const RankedUnit& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  });

  size_t count = size_t(std::floor(s * double(units.size())));
  std::vector<UnitRef> pruned;
  for (size_t k = 0; k < count; ++k) {
    const RankedUnit& u = units[k];
    masks[size_t(u.layer)](0, u.index) = real(0);
    pruned.push_back({u.layer, u.index});
    threshold = u.score;
  }
  std::sort(pruned.begin(), pruned.end(), [](const UnitRef& a, const UnitRef& b) {
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  });
  return pruned;
}

}  // namespace

PruneDecision select_prune_set(const ScoreTable& scores, const SparsitySpec& spec) {
  spec.validate();
  PruneDecision d;
  d.sparsity = spec.s;
  for (const auto& row : scores.head_scores)
    d.masks.head_masks.push_back(Mat::Ones(1, Eigen::Index(row.size())));
  for (const auto& row : scores.neuron_scores)
    d.masks.neuron_masks.push_back(Mat::Ones(1, Eigen::Index(row.size())));
  d.pruned_heads = prune_pool(scores.head_scores, spec.s, d.masks.head_masks, d.head_threshold);
  d.pruned_neurons =
      prune_pool(scores.neuron_scores, spec.s, d.masks.neuron_masks, d.neuron_threshold);
  return d;
}

MaskedModel apply_masks(const ModelConfig& cfg, const EncoderWeights& weights,
                        const PruneDecision& decision) {
  if (!decision.masks.shape_matches(cfg))
    raise(ErrorKind::Compatibility,
          "apply_masks: decision shape does not match the model config");
  if (int(weights.layers.size()) != cfg.num_layers)
    raise(ErrorKind::Compatibility, "apply_masks: weights do not match the config");
  return MaskedModel{&cfg, &weights, decision.masks};
}

CompactModel compact(const ModelConfig& cfg, const EncoderWeights& weights,
                     const PruneDecision& decision) {
  if (!decision.masks.shape_matches(cfg))
    raise(ErrorKind::Compatibility,
          "compact: decision shape does not match the model config");
  CompactModel out;
  out.cfg = cfg;
  if (decision.pruned_heads.empty() && decision.pruned_neurons.empty()) {
    out.weights = weights;  // identity: bit-equal weights, config untouched
    return out;
  }
  out.cfg.layer_heads.assign(size_t(cfg.num_layers), 0);
  out.cfg.layer_ffn.assign(size_t(cfg.num_layers), 0);
  out.weights.token_embedding = weights.token_embedding;
  out.weights.position_embedding = weights.position_embedding;
  for (int l = 0; l < cfg.num_layers; ++l) {
    const LayerWeights& lw = weights.layers[size_t(l)];
    const Mat& hm = decision.masks.head_masks[size_t(l)];
    const Mat& nm = decision.masks.neuron_masks[size_t(l)];
    LayerWeights nl;
    for (int h = 0; h < cfg.heads(l); ++h)
      if (hm(0, h) != real(0)) nl.heads.push_back(lw.heads[size_t(h)]);

    std::vector<int> kept;
    for (int n = 0; n < cfg.ffn(l); ++n)
      if (nm(0, n) != real(0)) kept.push_back(n);
    nl.w1.resize(lw.w1.rows(), Eigen::Index(kept.size()));
    nl.b1.resize(1, Eigen::Index(kept.size()));
    nl.w2.resize(Eigen::Index(kept.size()), lw.w2.cols());
    for (size_t k = 0; k < kept.size(); ++k) {
      nl.w1.col(Eigen::Index(k)) = lw.w1.col(kept[k]);
      nl.b1(0, Eigen::Index(k)) = lw.b1(0, kept[k]);
      nl.w2.row(Eigen::Index(k)) = lw.w2.row(kept[k]);
    }
    nl.b2 = lw.b2;
    nl.ln1_gamma = lw.ln1_gamma;
    nl.ln1_beta = lw.ln1_beta;
    nl.ln2_gamma = lw.ln2_gamma;
    nl.ln2_beta = lw.ln2_beta;
    out.cfg.layer_heads[size_t(l)] = int(nl.heads.size());
    out.cfg.layer_ffn[size_t(l)] = int(kept.size());
    out.weights.layers.push_back(std::move(nl));
  }
  out.cfg.validate();
  return out;
}

std::string decision_to_csv(const ScoreTable& scores, const PruneDecision& decision) {
  std::ostringstream out;
  out << "unit_type,layer,index,score,pruned\n";
  for (size_t l = 0; l < scores.head_scores.size(); ++l)
    for (size_t h = 0; h < scores.head_scores[l].size(); ++h)
      out << "head," << l << "," << h << "," << format_exact(scores.head_scores[l][h]) << ","
          << (decision.masks.head_masks[l](0, Eigen::Index(h)) == real(0) ? 1 : 0) << "\n";
  for (size_t l = 0; l < scores.neuron_scores.size(); ++l)
    for (size_t n = 0; n < scores.neuron_scores[l].size(); ++n)
      out << "neuron," << l << "," << n << "," << format_exact(scores.neuron_scores[l][n])
          << "," << (decision.masks.neuron_masks[l](0, Eigen::Index(n)) == real(0) ? 1 : 0)
          << "\n";
  return out.str();
}

PruneDecision decision_from_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  // (layer, index, pruned) per pool; shapes derived from the max indices present
  std::vector<std::vector<int>> head_state, neuron_state;  // -1 unseen, 0 kept, 1 pruned
  PruneDecision d;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "unit_type,layer,index,score,pruned")
        raise(ErrorKind::Parse, "decision csv line " + std::to_string(line_no) +
                                    ": unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    std::istringstream row(line);
    std::string unit_type, layer_s, index_s, score_s, pruned_s;
    if (!std::getline(row, unit_type, ',') || !std::getline(row, layer_s, ',') ||
        !std::getline(row, index_s, ',') || !std::getline(row, score_s, ',') ||
        !std::getline(row, pruned_s))
      raise(ErrorKind::Parse,
            "decision csv line " + std::to_string(line_no) + ": expected 5 fields");
    if (unit_type != "head" && unit_type != "neuron")
      raise(ErrorKind::Parse, "decision csv line " + std::to_string(line_no) +
                                  ": unknown unit_type '" + unit_type + "'");
    int layer, index, pruned;
    try {
      layer = std::stoi(layer_s);
      index = std::stoi(index_s);
      pruned = std::stoi(pruned_s);
      (void)std::stod(score_s);
    } catch (const std::exception&) {
      raise(ErrorKind::Parse, "decision csv line " + std::to_string(line_no) + ": bad number");
    }
    if (layer < 0 || index < 0 || (pruned != 0 && pruned != 1))
      raise(ErrorKind::Parse,
            "decision csv line " + std::to_string(line_no) + ": out-of-range value");
    auto& pool = unit_type == "head" ? head_state : neuron_state;
    if (size_t(layer) >= pool.size()) pool.resize(size_t(layer) + 1);
    auto& row_state = pool[size_t(layer)];
    if (size_t(index) >= row_state.size()) row_state.resize(size_t(index) + 1, -1);
    if (row_state[size_t(index)] != -1)
      raise(ErrorKind::Parse,
            "decision csv line " + std::to_string(line_no) + ": duplicate unit");
    row_state[size_t(index)] = pruned;
  }
  if (!saw_header) raise(ErrorKind::Parse, "decision csv: missing header row");

  auto materialize = [](const std::vector<std::vector<int>>& state, std::vector<Mat>& masks,
                        std::vector<UnitRef>& pruned_list) {
    for (size_t l = 0; l < state.size(); ++l) {
      Mat m = Mat::Ones(1, Eigen::Index(state[l].size()));
      for (size_t i = 0; i < state[l].size(); ++i) {
        if (state[l][i] == -1)
          raise(ErrorKind::Parse, "decision csv: missing unit layer " + std::to_string(l) +
                                      " index " + std::to_string(i));
        if (state[l][i] == 1) {
          m(0, Eigen::Index(i)) = real(0);
          pruned_list.push_back({int(l), int(i)});
        }
      }
      masks.push_back(std::move(m));
    }
  };
  materialize(head_state, d.masks.head_masks, d.pruned_heads);
  materialize(neuron_state, d.masks.neuron_masks, d.pruned_neurons);
  if (d.masks.head_masks.empty() || d.masks.neuron_masks.empty())
    raise(ErrorKind::Parse, "decision csv: no units listed");
  return d;
}

void write_decision_csv(const std::string& path, const ScoreTable& scores,
                        const PruneDecision& decision) {
  write_file_atomic(path, decision_to_csv(scores, decision));
}

PruneDecision read_decision_csv(const std::string& path) {
  return decision_from_csv(read_file(path));
}

}  // namespace spcse
