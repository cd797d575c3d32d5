#pragma once

#include <cstdint>
#include <string>

namespace spcse {

// Synthetic data generator: templated sentences "the <adj> <noun> <verb> the <object>
// <tail>" drawn from 8 disjoint topic word banks (8 words per slot); an eighth of the
// corpus sentences swap the subject and object words in place. Paraphrase pairs share
// q of the 5 content slots and receive gold score q.0, so full lexical overlap scores
// 5.0 and cross-topic pairs score 0.0. Every seventh pair is a role swap — the same
// bag of words with subject and object exchanged — scored 1.0, which token overlap
// alone ranks wrong; labeled sets carry the topic as the class.
struct SynthSpec {
  int sentences = 2000;
  uint64_t seed = 42;
  std::string out_dir = "data";
};

struct SynthPaths {
  std::string corpus;
  std::string eval_pairs;
  std::string labeled_train;
  std::string labeled_test;
};

SynthPaths gen_corpus(const SynthSpec& spec);

}  // namespace spcse
