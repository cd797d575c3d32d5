#include "spcse/scoring.hpp"

#include <cmath>
#include <sstream>

namespace spcse {

void ScoreConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    raise(ErrorKind::Config, "score.lambda must lie in [0, 1]");
  if (batch_size < 1) raise(ErrorKind::Config, "score.batch_size must be positive");
  if (!(eps_log > 0.0)) raise(ErrorKind::Config, "score.eps_log must be positive");
}

ScoreTable estimate_importance(const ModelConfig& cfg, const EncoderWeights& weights,
                               const MaskSet& masks, const ScoredPairSet& pairs,
                               const Vocab& vocab, const ScoreConfig& sc) {
  sc.validate();
  if (!masks.shape_matches(cfg))
    raise(ErrorKind::Shape, "estimate_importance: mask shapes do not match the config");
  if (!masks.all_ones())
    raise(ErrorKind::State,
          "estimate_importance: scores are defined at mask value 1; masks must be all ones");
  if (pairs.pairs.empty()) raise(ErrorKind::Data, "estimate_importance: empty scoring set");

  ScoreTable table;
  table.lambda = sc.lambda;
  table.dataset = pairs.source_path;
  for (int l = 0; l < cfg.num_layers; ++l) {
    table.head_scores.emplace_back(size_t(cfg.heads(l)), 0.0);
    table.neuron_scores.emplace_back(size_t(cfg.ffn(l)), 0.0);
  }

  GradientSet sinks = GradientSet::zeros_like(cfg, weights);
  const int total_pairs = int(pairs.pairs.size());
  for (int start = 0; start < total_pairs; start += sc.batch_size) {
    int count = std::min(sc.batch_size, total_pairs - start);
    std::vector<std::vector<int>> batch;
    batch.reserve(size_t(count) * 2);
    for (int i = 0; i < count; ++i)
      batch.push_back(tokenize(pairs.pairs[size_t(start + i)].sentence_a, vocab));
    for (int i = 0; i < count; ++i)
      batch.push_back(tokenize(pairs.pairs[size_t(start + i)].sentence_b, vocab));

    ad::Tape tape;
    sinks.set_zero();
    EncodeGraph g = build_encode(tape, cfg, weights, &masks, batch, false, 0, &sinks);
    ad::Var all = g.cls;
    if (sc.normalize_embeddings) all = ad::row_normalize(tape, all);
    ad::Var h = ad::slice_rows(tape, all, 0, count);
    ad::Var hplus = ad::slice_rows(tape, all, count, count);
    ad::Var align = ad::alignment_head(tape, h, hplus, real(sc.eps_log));
    ad::Var uniform = ad::uniformity_head(tape, all);
    ad::Var joint = ad::add(tape, ad::scale_const(tape, align, real(sc.lambda)),
                            ad::scale_const(tape, uniform, real(1.0 - sc.lambda)));
    tape.backward(joint);

    for (int l = 0; l < cfg.num_layers; ++l) {
      for (int hd = 0; hd < cfg.heads(l); ++hd)
        table.head_scores[size_t(l)][size_t(hd)] +=
            std::fabs(double(sinks.head_mask_grads[size_t(l)](0, hd)));
      for (int nr = 0; nr < cfg.ffn(l); ++nr)
        table.neuron_scores[size_t(l)][size_t(nr)] +=
            std::fabs(double(sinks.neuron_mask_grads[size_t(l)](0, nr)));
    }
    ++table.batch_count;
  }

  for (auto& row : table.head_scores)
    for (double& v : row) v /= double(table.batch_count);
  for (auto& row : table.neuron_scores)
    for (double& v : row) v /= double(table.batch_count);
  return table;
}

std::string score_table_to_csv(const ScoreTable& table) {
  std::ostringstream out;
  out << "# lambda=" << format_real(table.lambda) << " batches=" << table.batch_count
      << " dataset=" << table.dataset << "\n";
  out << "unit_type,layer,index,score\n";
  // Exact score bytes: the prune stage re-reads this file, and a rounded near-tie
  // could rank units differently from the table it was written from.
  for (size_t l = 0; l < table.head_scores.size(); ++l)
    for (size_t h = 0; h < table.head_scores[l].size(); ++h)
      out << "head," << l << "," << h << ","
          << format_exact(table.head_scores[l][h]) << "\n";
  for (size_t l = 0; l < table.neuron_scores.size(); ++l)
    for (size_t n = 0; n < table.neuron_scores[l].size(); ++n)
      out << "neuron," << l << "," << n << ","
          << format_exact(table.neuron_scores[l][n]) << "\n";
  return out.str();
}

ScoreTable score_table_from_csv(const std::string& content) {
  ScoreTable table;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "unit_type,layer,index,score")
        raise(ErrorKind::Parse, "score csv line " + std::to_string(line_no) +
                                    ": unexpected header '" + line + "'");
      saw_header = true;
      continue;
    }
    std::istringstream row(line);
    std::string unit_type, layer_s, index_s, score_s;
    if (!std::getline(row, unit_type, ',') || !std::getline(row, layer_s, ',') ||
        !std::getline(row, index_s, ',') || !std::getline(row, score_s))
      raise(ErrorKind::Parse, "score csv line " + std::to_string(line_no) + ": expected 4 fields");
    int layer, index;
    double score;
    try {
      layer = std::stoi(layer_s);
      index = std::stoi(index_s);
      score = std::stod(score_s);
    } catch (const std::exception&) {
      raise(ErrorKind::Parse, "score csv line " + std::to_string(line_no) + ": bad number");
    }
    if (layer < 0 || index < 0 || !std::isfinite(score) || score < 0.0)
      raise(ErrorKind::Parse,
            "score csv line " + std::to_string(line_no) + ": out-of-range value");
    if (unit_type != "head" && unit_type != "neuron")
      raise(ErrorKind::Parse, "score csv line " + std::to_string(line_no) +
                                  ": unknown unit_type '" + unit_type + "'");
    auto& pool = unit_type == "head" ? table.head_scores : table.neuron_scores;
    if (size_t(layer) >= pool.size()) pool.resize(size_t(layer) + 1);
    if (size_t(index) >= pool[size_t(layer)].size())
      pool[size_t(layer)].resize(size_t(index) + 1, -1.0);
    if (pool[size_t(layer)][size_t(index)] >= 0.0)
      raise(ErrorKind::Parse,
            "score csv line " + std::to_string(line_no) + ": duplicate unit");
    pool[size_t(layer)][size_t(index)] = score;
  }
  if (!saw_header) raise(ErrorKind::Parse, "score csv: missing header row");
  for (const auto& pool : {&table.head_scores, &table.neuron_scores})
    for (const auto& row : *pool)
      for (double v : row)
        if (v < 0.0) raise(ErrorKind::Parse, "score csv: missing unit entries");
  return table;
}

void write_score_csv(const std::string& path, const ScoreTable& table) {
  write_file_atomic(path, score_table_to_csv(table));
}

ScoreTable read_score_csv(const std::string& path) {
  return score_table_from_csv(read_file(path));
}

}  // namespace spcse
