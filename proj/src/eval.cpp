#include "spcse/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <thread>

#include "spcse/checkpoint.hpp"
#include "spcse/losses.hpp"
#include "spcse/pruning.hpp"
#include "spcse/scoring.hpp"
#include "spcse/train.hpp"

namespace spcse {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t(0));
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = (double(i) + double(j)) / 2.0 + 1.0;  // mean of 1-based positions i..j
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    raise(ErrorKind::Metric, "spearman: length mismatch (" + std::to_string(x.size()) +
                                 " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 2) raise(ErrorKind::Metric, "spearman: need at least 2 points");
  for (double v : x)
    if (!std::isfinite(v)) raise(ErrorKind::Metric, "spearman: non-finite input");
  for (double v : y)
    if (!std::isfinite(v)) raise(ErrorKind::Metric, "spearman: non-finite input");

  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= double(n);
  my /= double(n);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double a = rx[i] - mx, b = ry[i] - my;
    cov += a * b;
    vx += a * a;
    vy += b * b;
  }
  if (vx == 0.0 || vy == 0.0) raise(ErrorKind::Metric, "spearman: constant input");
  return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

Mat embed_all(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
              const std::vector<std::vector<int>>& sentences) {
  if (sentences.empty()) raise(ErrorKind::Input, "embed_all: no sentences");
  constexpr size_t kChunk = 64;
  Mat out(Eigen::Index(sentences.size()), cfg.hidden_dim);
  for (size_t start = 0; start < sentences.size(); start += kChunk) {
    size_t stop = std::min(start + kChunk, sentences.size());
    std::vector<std::vector<int>> chunk(sentences.begin() + long(start),
                                        sentences.begin() + long(stop));
    Mat emb = forward_embed(cfg, w, masks, chunk, false, 0);
    out.middleRows(Eigen::Index(start), Eigen::Index(stop - start)) = emb;
  }
  return out;
}

TokenizedPairs tokenize_pairs(const ScoredPairSet& pairs, const Vocab& vocab) {
  TokenizedPairs t;
  for (const ScoredPair& p : pairs.pairs) {
    t.a.push_back(tokenize(p.sentence_a, vocab));
    t.b.push_back(tokenize(p.sentence_b, vocab));
    t.gold.push_back(p.gold);
  }
  return t;
}

StsReport eval_sts_embeddings(const Mat& emb_a, const Mat& emb_b,
                              const std::vector<double>& gold, double eps_log) {
  if (emb_a.rows() != emb_b.rows() || emb_a.cols() != emb_b.cols())
    raise(ErrorKind::Shape, "eval: pair embedding shape mismatch");
  if (size_t(emb_a.rows()) != gold.size())
    raise(ErrorKind::Shape, "eval: embedding/gold count mismatch");
  Eigen::Index n = emb_a.rows();
  if (n < 2) raise(ErrorKind::Metric, "eval: need at least 2 scored pairs");

  Mat an = normalize_rows(emb_a);
  Mat bn = normalize_rows(emb_b);

  std::vector<double> pred(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double dot = 0.0;
    for (Eigen::Index c = 0; c < an.cols(); ++c) dot += double(an(i, c)) * double(bn(i, c));
    pred[size_t(i)] = dot;
  }

  StsReport r;
  try {
    r.rho = spearman(pred, gold);
    r.rho_defined = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Metric) throw;
    log_warn(std::string("eval: spearman undefined (") + e.what() + ")");
    r.rho = std::numeric_limits<double>::quiet_NaN();
    r.rho_defined = false;
  }

  std::vector<Eigen::Index> high;
  for (Eigen::Index i = 0; i < n; ++i)
    if (gold[size_t(i)] >= 4.0) high.push_back(i);
  if (high.empty())
    raise(ErrorKind::Metric, "eval: no pairs with gold >= 4 to measure alignment on");
  Mat asub(Eigen::Index(high.size()), an.cols()), bsub(Eigen::Index(high.size()), bn.cols());
  for (size_t k = 0; k < high.size(); ++k) {
    asub.row(Eigen::Index(k)) = an.row(high[k]);
    bsub.row(Eigen::Index(k)) = bn.row(high[k]);
  }
  r.alignment = alignment_loss(asub, bsub, eps_log);

  Mat all(2 * n, an.cols());
  all.topRows(n) = an;
  all.bottomRows(n) = bn;
  r.uniformity = uniformity_loss(all);
  return r;
}

StsReport eval_sts(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                   const TokenizedPairs& pairs, double eps_log) {
  if (pairs.a.empty()) raise(ErrorKind::Input, "eval: no scored pairs");
  Mat emb_a = embed_all(cfg, w, masks, pairs.a);
  Mat emb_b = embed_all(cfg, w, masks, pairs.b);
  return eval_sts_embeddings(emb_a, emb_b, pairs.gold, eps_log);
}

double probe_fit_accuracy(const Mat& train_emb, const std::vector<int>& train_labels,
                          int num_classes, const Mat& test_emb,
                          const std::vector<int>& test_labels, int iters, double lr) {
  if (num_classes < 2)
    raise(ErrorKind::Config, "probe: training set must contain at least 2 classes");
  if (size_t(train_emb.rows()) != train_labels.size() ||
      size_t(test_emb.rows()) != test_labels.size())
    raise(ErrorKind::Shape, "probe: embedding/label count mismatch");
  if (test_labels.empty()) raise(ErrorKind::Input, "probe: empty test set");
  for (int l : train_labels)
    if (l < 0 || l >= num_classes)
      raise(ErrorKind::Input, "probe: train label out of range");

  Eigen::Index n = train_emb.rows(), d = train_emb.cols();
  DMat x = train_emb.cast<double>();
  DMat wmat = DMat::Zero(d, num_classes);
  DMat bias = DMat::Zero(1, num_classes);

  for (int it = 0; it < iters; ++it) {
    DMat logits = x * wmat;
    logits.rowwise() += bias.row(0);
    DMat p(n, num_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = logits.row(i).maxCoeff();
      double z = 0.0;
      for (int c = 0; c < num_classes; ++c) z += std::exp(logits(i, c) - mx);
      for (int c = 0; c < num_classes; ++c) p(i, c) = std::exp(logits(i, c) - mx) / z;
    }
    for (Eigen::Index i = 0; i < n; ++i) p(i, train_labels[size_t(i)]) -= 1.0;
    DMat gw = x.transpose() * p / double(n);
    DMat gb = p.colwise().sum() / double(n);
    wmat -= lr * gw;
    bias -= lr * gb;
  }

  DMat logits = test_emb.cast<double>() * wmat;
  logits.rowwise() += bias.row(0);
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < num_classes; ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    if (best == test_labels[size_t(i)]) ++correct;
  }
  return double(correct) / double(test_labels.size());
}

double linear_probe(const ModelConfig& cfg, const EncoderWeights& w, const MaskSet* masks,
                    const Vocab& vocab, const LabeledSet& train, const LabeledSet& test) {
  auto embed_set = [&](const LabeledSet& set, std::vector<int>& labels) {
    std::vector<std::vector<int>> sents;
    for (const LabeledExample& e : set.examples) {
      sents.push_back(tokenize(e.sentence, vocab));
      labels.push_back(e.label);
    }
    return embed_all(cfg, w, masks, sents);
  };
  std::vector<int> train_labels, test_labels;
  Mat train_emb = embed_set(train, train_labels);
  Mat test_emb = embed_set(test, test_labels);
  return probe_fit_accuracy(train_emb, train_labels, train.num_classes, test_emb,
                            test_labels);
}

std::string sweep_report_to_csv(const SweepReport& report) {
  std::string out = "s,lambda,spearman,alignment,uniformity,probe_accuracy,wallclock_s\n";
  for (const EvalRow& r : report.rows) {
    out += format_real(r.s);
    out += ',';
    if (r.has_lambda) out += format_real(r.lambda);
    out += ',';
    out += r.rho_defined_text();
    out += ',';
    out += format_real(r.sts.alignment);
    out += ',';
    out += format_real(r.sts.uniformity);
    out += ',';
    if (r.has_probe) out += format_real(r.probe_accuracy);
    out += ',';
    out += format_real(r.wallclock_s);
    out += '\n';
  }
  return out;
}

namespace {

// Grid values arrive user-ordered and possibly duplicated; rows must be unique and
// order-stable by (s, lambda).
std::vector<double> sorted_unique(std::vector<double> v, const char* what) {
  std::sort(v.begin(), v.end());
  auto last = std::unique(v.begin(), v.end());
  if (last != v.end()) {
    log_warn(std::string("sweep: duplicate ") + what + " values collapsed to one row each");
    v.erase(last, v.end());
  }
  return v;
}

struct SweepCell {
  double s = 0.0;
  int lambda_index = -1;  // -1 marks the dense baseline cell
};

}  // namespace

SweepReport run_sweep(const RunConfig& rc, int jobs) {
  rc.validate();
  if (jobs < 1) raise(ErrorKind::Config, "jobs must be >= 1");
  namespace fs = std::filesystem;
  const std::string od = rc.paths.out_dir;
  std::error_code ec;
  fs::create_directories(od, ec);
  if (ec) raise(ErrorKind::Io, "cannot create output directory " + od + ": " + ec.message());

  SentenceCorpus corpus = load_corpus(rc.paths.corpus);
  Vocab vocab = build_vocab(corpus, rc.model.vocab_size);
  std::vector<std::vector<int>> corpus_tokens =
      tokenize_corpus(corpus, vocab, rc.model.max_seq_len);
  TokenizedPairs eval_tok = tokenize_pairs(load_scored_pairs(rc.paths.eval_pairs), vocab);
  std::string score_path =
      rc.paths.score_pairs.empty() ? rc.paths.eval_pairs : rc.paths.score_pairs;
  ScoredPairSet score_pairs = load_scored_pairs(score_path);

  bool probe = !rc.paths.labeled_train.empty() && !rc.paths.labeled_test.empty();
  LabeledSet labeled_train, labeled_test;
  if (probe) {
    labeled_train = load_labeled(rc.paths.labeled_train);
    labeled_test = load_labeled(rc.paths.labeled_test);
  }

  log_info("sweep: pretraining");
  EncoderWeights weights = init_model(rc.model);
  MaskSet full = MaskSet::full(rc.model);
  TrainLog pre_log;
  RewindCheckpoint rewind = pretrain_mlm(rc.model, weights, corpus_tokens, rc.train, &pre_log);
  save_checkpoint(od + "/pretrained.spcs",
                  {rc, weights, full, uint64_t(rc.train.pretrain_steps)});
  save_checkpoint(od + "/rewind.spcs", {rc, rewind.weights, full, uint64_t(rewind.step)});
  write_file_atomic(od + "/pretrain_log.csv", pre_log.to_csv());

  log_info("sweep: contrastive training (scoring model)");
  EncoderWeights scored_model = weights;
  TrainLog train_log;
  train_contrastive(rc.model, scored_model, corpus_tokens, rc.train, full, &train_log);
  save_checkpoint(od + "/trained.spcs",
                  {rc, scored_model, full,
                   uint64_t(rc.train.pretrain_steps + rc.train.contrastive_steps)});
  write_file_atomic(od + "/train_log.csv", train_log.to_csv());

  std::vector<double> s_grid = sorted_unique(rc.sweep.sparsity_grid, "sparsity");
  if (!s_grid.empty() && s_grid.front() == 0.0) {
    log_warn("sweep: s=0 in the sparsity grid is the implicit dense baseline row");
    s_grid.erase(s_grid.begin());
  }
  std::vector<double> l_grid = sorted_unique(rc.sweep.lambda_grid, "lambda");

  std::vector<ScoreTable> tables;
  for (double lambda : l_grid) {
    log_info("sweep: scoring at lambda=" + format_real(lambda));
    ScoreConfig sc = rc.score;
    sc.lambda = lambda;
    ScoreTable t = estimate_importance(rc.model, scored_model, full, score_pairs, vocab, sc);
    write_score_csv(od + "/scores_lambda" + format_real(lambda) + ".csv", t);
    tables.push_back(std::move(t));
  }

  std::vector<SweepCell> cells;
  cells.push_back({0.0, -1});
  for (double s : s_grid)
    for (size_t li = 0; li < l_grid.size(); ++li) cells.push_back({s, int(li)});

  std::vector<EvalRow> rows(cells.size());
  auto run_cell = [&](const SweepCell& cell) {
    auto t0 = std::chrono::steady_clock::now();
    MaskSet masks;
    if (cell.lambda_index < 0) {
      masks = full;
    } else {
      PruneDecision decision =
          select_prune_set(tables[size_t(cell.lambda_index)], SparsitySpec{cell.s});
      masks = std::move(decision.masks);
    }
    EncoderWeights final_w =
        rewind_and_retrain(rc.model, masks, rewind, corpus_tokens, rc.train, nullptr);
    EvalRow row;
    row.s = cell.s;
    row.has_lambda = cell.lambda_index >= 0;
    row.lambda = row.has_lambda ? l_grid[size_t(cell.lambda_index)] : 0.0;
    row.sts = eval_sts(rc.model, final_w, &masks, eval_tok, rc.score.eps_log);
    if (probe) {
      row.probe_accuracy =
          linear_probe(rc.model, final_w, &masks, vocab, labeled_train, labeled_test);
      row.has_probe = true;
    }
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
  };

  std::atomic<size_t> next{0};
  size_t nthreads = std::min(size_t(jobs), cells.size());
  std::vector<std::exception_ptr> errors(nthreads);
  auto worker = [&](size_t tid) {
    try {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= cells.size()) break;
        log_info("sweep: cell s=" + format_real(cells[i].s) +
                 (cells[i].lambda_index < 0
                      ? std::string(" (dense baseline)")
                      : " lambda=" + format_real(l_grid[size_t(cells[i].lambda_index)])));
        rows[i] = run_cell(cells[i]);
      }
    } catch (...) {
      errors[tid] = std::current_exception();
      next.store(cells.size());
    }
  };
  if (nthreads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  SweepReport report;
  report.rows = std::move(rows);

  write_file_atomic(od + "/sweep.csv", sweep_report_to_csv(report));

  const EvalRow& dense = report.rows.front();
  for (size_t li = 0; li < l_grid.size(); ++li) {
    std::string curve =
        "# sparsity spearman (lambda=" + format_real(l_grid[li]) + ")\n";
    curve += format_real(0.0) + " " + dense.rho_defined_text() + "\n";
    for (const EvalRow& r : report.rows)
      if (r.has_lambda && r.lambda == l_grid[li])
        curve += format_real(r.s) + " " + r.rho_defined_text() + "\n";
    write_file_atomic(od + "/curve_lambda" + format_real(l_grid[li]) + ".dat", curve);
  }

  std::string scatter =
      "# alignment uniformity sparsity lambda (lambda=-1 marks the dense baseline)\n";
  for (const EvalRow& r : report.rows)
    scatter += format_real(r.sts.alignment) + " " + format_real(r.sts.uniformity) + " " +
               format_real(r.s) + " " + (r.has_lambda ? format_real(r.lambda) : "-1") +
               "\n";
  write_file_atomic(od + "/scatter.dat", scatter);

  return report;
}

}  // namespace spcse
