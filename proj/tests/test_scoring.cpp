#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "spcse/scoring.hpp"

using namespace spcse;

namespace {

struct Fixture {
  ModelConfig cfg;
  EncoderWeights weights;
  Vocab vocab;
  ScoredPairSet pairs;
  ScoreConfig sc;

  Fixture() {
    SentenceCorpus corpus;
    corpus.sentences = {"red sun over calm sea",   "blue rain under cold sky",
                        "red sun above warm sea",  "green wind over dry land",
                        "blue storm under dark sky", "green breeze over wet land"};
    vocab = build_vocab(corpus, 200);
    cfg.vocab_size = vocab.size();
    cfg.max_seq_len = 8;
    cfg.hidden_dim = 16;
    cfg.num_layers = 2;
    cfg.heads_per_layer = 4;
    cfg.head_dim = 4;
    cfg.ffn_dim = 12;
    cfg.dropout_rate = 0.1;
    cfg.seed = 11;
    weights = init_model(cfg);
    pairs.pairs = {{"red sun over calm sea", "red sun above warm sea", 4.5},
                   {"blue rain under cold sky", "blue storm under dark sky", 4.0},
                   {"green wind over dry land", "green breeze over wet land", 3.5},
                   {"red sun over calm sea", "blue rain under cold sky", 1.0},
                   {"green wind over dry land", "red sun above warm sea", 0.5},
                   {"blue storm under dark sky", "green breeze over wet land", 1.5}};
    pairs.source_path = "inline";
    sc.lambda = 0.5;
    sc.batch_size = 3;
  }
};

}  // namespace

TEST_CASE("estimate_importance produces finite nonnegative scores with metadata") {
  Fixture f;
  ScoreTable t =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), f.pairs, f.vocab, f.sc);
  REQUIRE(t.head_scores.size() == 2);
  REQUIRE(t.neuron_scores.size() == 2);
  REQUIRE(t.head_scores[0].size() == 4);
  REQUIRE(t.neuron_scores[0].size() == 12);
  for (const auto& row : t.head_scores)
    for (double v : row) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  CHECK(t.lambda == 0.5);
  CHECK(t.batch_count == 2);  // 6 pairs in batches of 3
  CHECK(t.dataset == "inline");

  // the model is not degenerate: something has nonzero sensitivity
  double total = 0.0;
  for (const auto& row : t.head_scores)
    for (double v : row) total += v;
  CHECK(total > 0.0);
}

TEST_CASE("a structurally dead head scores exactly zero") {
  Fixture f;
  f.weights.layers[1].heads[2].wo.setZero();
  f.weights.layers[1].heads[2].bo.setZero();
  ScoreTable t =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), f.pairs, f.vocab, f.sc);
  CHECK(t.head_scores[1][2] == 0.0);
  CHECK(t.head_scores[0][0] > 0.0);
}

TEST_CASE("mask gradients agree with central finite differences") {
  Fixture f;
  ScoreTable ad =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), f.pairs, f.vocab, f.sc);
  ScoreTable fd = oracle::fd_importance(f.cfg, f.weights, f.pairs, f.vocab, f.sc, 1e-3);
  auto close = [](double a, double b) {
    double rel = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
    return rel < 1e-3 || std::abs(a - b) < 1e-8;
  };
  for (size_t l = 0; l < 2; ++l) {
    for (size_t h = 0; h < 4; ++h) {
      INFO("head ", l, "/", h, ": ad ", ad.head_scores[l][h], " fd ", fd.head_scores[l][h]);
      CHECK(close(ad.head_scores[l][h], fd.head_scores[l][h]));
    }
    for (size_t j = 0; j < 12; ++j) {
      INFO("neuron ", l, "/", j, ": ad ", ad.neuron_scores[l][j], " fd ",
           fd.neuron_scores[l][j]);
      CHECK(close(ad.neuron_scores[l][j], fd.neuron_scores[l][j]));
    }
  }
}

TEST_CASE("duplicating the scoring set leaves the mean unchanged") {
  Fixture f;
  ScoreTable once =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), f.pairs, f.vocab, f.sc);
  ScoredPairSet doubled = f.pairs;
  doubled.pairs.insert(doubled.pairs.end(), f.pairs.pairs.begin(), f.pairs.pairs.end());
  ScoreTable twice =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), doubled, f.vocab, f.sc);
  CHECK(twice.batch_count == 4);
  for (size_t l = 0; l < 2; ++l) {
    for (size_t h = 0; h < 4; ++h)
      CHECK(std::abs(once.head_scores[l][h] - twice.head_scores[l][h]) < 1e-12);
    for (size_t j = 0; j < 12; ++j)
      CHECK(std::abs(once.neuron_scores[l][j] - twice.neuron_scores[l][j]) < 1e-12);
  }
}

TEST_CASE("scoring requires all-ones masks and a nonempty pair set") {
  Fixture f;
  MaskSet masks = MaskSet::full(f.cfg);
  masks.head_masks[0](0, 1) = real(0);
  CHECK_THROWS_AS(estimate_importance(f.cfg, f.weights, masks, f.pairs, f.vocab, f.sc),
                  Error);
  ScoredPairSet empty;
  CHECK_THROWS_AS(
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), empty, f.vocab, f.sc),
      Error);
  ScoreConfig bad = f.sc;
  bad.lambda = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("score table CSV round trips exactly") {
  Fixture f;
  ScoreTable t =
      estimate_importance(f.cfg, f.weights, MaskSet::full(f.cfg), f.pairs, f.vocab, f.sc);
  std::string csv = score_table_to_csv(t);
  ScoreTable back = score_table_from_csv(csv);
  REQUIRE(back.head_scores.size() == t.head_scores.size());
  REQUIRE(back.neuron_scores.size() == t.neuron_scores.size());
  for (size_t l = 0; l < t.head_scores.size(); ++l)
    for (size_t h = 0; h < t.head_scores[l].size(); ++h)
      CHECK(back.head_scores[l][h] == t.head_scores[l][h]);
  for (size_t l = 0; l < t.neuron_scores.size(); ++l)
    for (size_t j = 0; j < t.neuron_scores[l].size(); ++j)
      CHECK(back.neuron_scores[l][j] == t.neuron_scores[l][j]);

  CHECK_THROWS_AS(score_table_from_csv("not,a,score,table\n"), Error);
  CHECK_THROWS_AS(score_table_from_csv("unit_type,layer,index,score\nhead,0,0,-1\n"), Error);

  write_score_csv("/tmp/spcse_test_scores.csv", t);
  ScoreTable from_file = read_score_csv("/tmp/spcse_test_scores.csv");
  CHECK(from_file.head_scores == t.head_scores);
  CHECK(from_file.neuron_scores == t.neuron_scores);
  std::remove("/tmp/spcse_test_scores.csv");
}
