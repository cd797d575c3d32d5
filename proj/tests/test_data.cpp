#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "spcse/data.hpp"

using namespace spcse;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/spcse_test_" + name) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_corpus keeps nonblank lines in order") {
  TempFile f("corpus.txt", "the cat sat\n\nTHE DOG ran\n   \nbirds fly\n");
  SentenceCorpus c = load_corpus(f.path);
  REQUIRE(c.sentences.size() == 3);
  CHECK(c.sentences[0] == "the cat sat");
  CHECK(c.sentences[1] == "THE DOG ran");
  CHECK(c.sentences[2] == "birds fly");
  CHECK(c.source_path == f.path);
  CHECK_THROWS_AS(load_corpus("/tmp/spcse_missing_corpus.txt"), Error);
}

TEST_CASE("load_scored_pairs parses and validates the three-column format") {
  TempFile f("pairs.tsv", "a b\tc d\t4.5\nx\ty\t0\n");
  ScoredPairSet p = load_scored_pairs(f.path);
  REQUIRE(p.pairs.size() == 2);
  CHECK(p.pairs[0].sentence_a == "a b");
  CHECK(p.pairs[0].sentence_b == "c d");
  CHECK(p.pairs[0].gold == doctest::Approx(4.5));
  CHECK(p.pairs[1].gold == doctest::Approx(0.0));

  TempFile bad_cols("pairs_bad.tsv", "only\ttwo\n");
  CHECK_THROWS_AS(load_scored_pairs(bad_cols.path), Error);
  TempFile bad_range("pairs_range.tsv", "a\tb\t9.1\n");
  CHECK_THROWS_AS(load_scored_pairs(bad_range.path), Error);
  TempFile bad_num("pairs_num.tsv", "a\tb\thigh\n");
  CHECK_THROWS_AS(load_scored_pairs(bad_num.path), Error);
}

TEST_CASE("load_labeled requires dense labels and counts classes") {
  TempFile f("labeled.tsv", "0\tfirst one\n2\tthird kind\n1\tsecond kind\n0\tfirst again\n");
  LabeledSet s = load_labeled(f.path);
  REQUIRE(s.examples.size() == 4);
  CHECK(s.num_classes == 3);
  CHECK(s.examples[1].label == 2);
  CHECK(s.examples[1].sentence == "third kind");

  TempFile gap("labeled_gap.tsv", "0\ta\n3\tb\n");  // label 1,2 missing
  CHECK_THROWS_AS(load_labeled(gap.path), Error);
  TempFile neg("labeled_neg.tsv", "-1\ta\n");
  CHECK_THROWS_AS(load_labeled(neg.path), Error);
}

TEST_CASE("build_vocab ranks by frequency with lexicographic ties after reserved ids") {
  SentenceCorpus c;
  c.sentences = {"bb aa bb", "cc aa bb", "dd cc"};
  // freq: bb=3, aa=2, cc=2, dd=1 -> order bb, aa, cc, dd
  Vocab v = build_vocab(c, 100);
  CHECK(v.size() == 8);
  CHECK(v.id_to_token[0] == "<pad>");
  CHECK(v.id_to_token[1] == "<cls>");
  CHECK(v.id_to_token[2] == "<mask>");
  CHECK(v.id_to_token[3] == "<unk>");
  CHECK(v.token_to_id.at("bb") == 4);
  CHECK(v.token_to_id.at("aa") == 5);  // tie with cc broken lexicographically
  CHECK(v.token_to_id.at("cc") == 6);
  CHECK(v.token_to_id.at("dd") == 7);

  Vocab capped = build_vocab(c, 6);  // room for two content tokens
  CHECK(capped.size() == 6);
  CHECK(capped.token_to_id.count("cc") == 0);

  CHECK_THROWS_AS(build_vocab(c, 4), Error);  // no room for content tokens
}

TEST_CASE("tokenize lowercases, maps unknowns, and never emits reserved tokens") {
  SentenceCorpus c;
  c.sentences = {"alpha beta", "alpha gamma"};
  Vocab v = build_vocab(c, 100);
  std::vector<int> ids = tokenize("Alpha UNSEEN beta", v);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == v.token_to_id.at("alpha"));
  CHECK(ids[1] == kUnkId);
  CHECK(ids[2] == v.token_to_id.at("beta"));
  for (int id : ids) CHECK(id != kClsId);
  CHECK(tokenize("   ", v).empty());
  // literal reserved spellings in text fall back to <unk> rather than CLS/PAD/MASK
  std::vector<int> reserved = tokenize("<pad> <cls> <mask>", v);
  for (int id : reserved) CHECK(id == kUnkId);
}

TEST_CASE("make_batches permutes deterministically and drops undersized tails") {
  auto b1 = make_batches(10, 4, 3);
  auto b2 = make_batches(10, 4, 3);
  CHECK(b1 == b2);
  auto b3 = make_batches(10, 4, 4);
  CHECK(b1 != b3);

  // 10 = 4 + 4 + 2: tail of two survives
  REQUIRE(b1.size() == 3);
  CHECK(b1[2].size() == 2);
  // 9 = 4 + 4 + 1: singleton tail dropped
  auto b4 = make_batches(9, 4, 3);
  REQUIRE(b4.size() == 2);

  std::set<int> seen;
  for (const auto& batch : b1)
    for (int i : batch) seen.insert(i);
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 9);

  CHECK_THROWS_AS(make_batches(10, 1, 0), Error);
  CHECK_THROWS_AS(make_batches(0, 4, 0), Error);
}

TEST_CASE("split_whitespace_lower folds case and collapses runs") {
  auto words = split_whitespace_lower("  The\tQuick \n BROWN  fox ");
  REQUIRE(words.size() == 4);
  CHECK(words[0] == "the");
  CHECK(words[1] == "quick");
  CHECK(words[2] == "brown");
  CHECK(words[3] == "fox");
  CHECK(split_whitespace_lower("").empty());
}
