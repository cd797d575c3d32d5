#pragma once

#include <string>
#include <vector>

#include "spcse/data.hpp"
#include "spcse/model.hpp"
#include "spcse/runconfig.hpp"

namespace spcse {

// Pearson correlation of average-tie ranks. Length mismatch, fewer than 2 points, or a
// constant side is a metric error.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// CLS embeddings for tokenized sentences, dropout off, forward passes chunked to bound
// peak memory.
Mat embed_all(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
              const std::vector<std::vector<int>>& sentences);

struct TokenizedPairs {
  std::vector<std::vector<int>> a, b;
  std::vector<double> gold;
};

TokenizedPairs tokenize_pairs(const ScoredPairSet& pairs, const Vocab& vocab);

struct StsReport {
  double rho = 0.0;
  bool rho_defined = false;  // false when predictions or gold are rank-degenerate
  double alignment = 0.0;    // over pairs with gold >= 4.0, unit-normalized embeddings
  double uniformity = 0.0;   // over all embeddings of both sides
};

StsReport eval_sts_embeddings(const Mat& emb_a, const Mat& emb_b,
                              const std::vector<double>& gold, double eps_log);
StsReport eval_sts(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                   const TokenizedPairs& pairs, double eps_log);

// Multinomial logistic regression on frozen embeddings: zero init, fixed-step full-batch
// gradient descent, deterministic argmax (lowest index wins ties). Test labels outside
// the train label set score as wrong.
double probe_fit_accuracy(const Mat& train_emb, const std::vector<int>& train_labels,
                          int num_classes, const Mat& test_emb,
                          const std::vector<int>& test_labels, int iters = 300,
                          double lr = 0.5);

double linear_probe(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                    const Vocab& vocab, const LabeledSet& train, const LabeledSet& test);

struct EvalRow {
  double s = 0.0;
  bool has_lambda = false;  // the dense baseline row carries no lambda
  double lambda = 0.0;
  StsReport sts;
  bool has_probe = false;
  double probe_accuracy = 0.0;
  double wallclock_s = 0.0;

  std::string rho_defined_text() const {
    return sts.rho_defined ? format_real(sts.rho) : "nan";
  }
};

struct SweepReport {
  std::vector<EvalRow> rows;  // ordered by (s, lambda), dense baseline first
};

std::string sweep_report_to_csv(const SweepReport& report);

// Full pipeline: pretrain once, contrastive-train once (the scoring model), then for each
// lambda score once and for each (s, lambda) cell prune/rewind/retrain/evaluate. The dense
// baseline row is the identity-pruning cell (all-ones masks). Writes sweep.csv, one
// curve_lambda<v>.dat per lambda, scatter.dat, stage checkpoints, and per-lambda score
// tables under rc.paths.out_dir. Cells run on `jobs` threads; row order is independent of
// scheduling.
SweepReport run_sweep(const RunConfig& rc, int jobs);

}  // namespace spcse
