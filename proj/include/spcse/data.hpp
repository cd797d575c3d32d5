#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "spcse/common.hpp"

namespace spcse {

// Reserved vocabulary ids.
inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kUnkId = 3;

struct Vocab {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // dense, reserved ids at 0..3
  int size() const { return int(id_to_token.size()); }
};

struct SentenceCorpus {
  std::vector<std::string> sentences;
  std::string source_path;
};

struct ScoredPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold;  // [0, 5]
};

struct ScoredPairSet {
  std::vector<ScoredPair> pairs;
  std::string source_path;
};

struct LabeledExample {
  std::string sentence;
  int label;
};

struct LabeledSet {
  std::vector<LabeledExample> examples;
  int num_classes = 0;
  std::string source_path;
};

// One sentence per line, UTF-8; blank lines skipped.
SentenceCorpus load_corpus(const std::string& path);

// "sentence_a<TAB>sentence_b<TAB>score" with score in [0, 5].
ScoredPairSet load_scored_pairs(const std::string& path);

// "label<TAB>sentence" with labels dense in [0, num_classes).
LabeledSet load_labeled(const std::string& path);

// Whitespace-split lowercased tokens ranked by descending frequency (ties broken
// lexicographically); top (max_size - 4) kept behind the reserved ids.
Vocab build_vocab(const SentenceCorpus& corpus, int max_size);

std::vector<int> tokenize(const std::string& sentence, const Vocab& vocab);

// Deterministic permutation of [0, count) chunked into batches of batch_size;
// a trailing batch smaller than 2 is dropped (contrastive training needs negatives).
std::vector<std::vector<int>> make_batches(int count, int batch_size, uint64_t epoch_seed);

std::vector<std::string> split_whitespace_lower(const std::string& s);

}  // namespace spcse
