#include "spcse/synth.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "spcse/common.hpp"

namespace spcse {

namespace {

constexpr int kTopicCount = 8;
constexpr int kSlotCount = 5;
constexpr int kWordsPerSlot = 8;

constexpr std::array<const char*, kTopicCount> kTopics = {"sun",  "rain", "snow", "wind",
                                                          "heat", "fog",  "hail", "dew"};
constexpr std::array<char, kSlotCount> kSlotTags = {'a', 'n', 'v', 'o', 't'};

std::string word(int topic, int slot, int index) {
  std::string w = kTopics[size_t(topic)];
  w += kSlotTags[size_t(slot)];
  w += char('0' + index);
  return w;
}

// `swapped` exchanges the subject and object words in place, so the sentence carries
// the same bag of tokens with the two noun roles reversed.
std::string sentence(int topic, const std::array<int, kSlotCount>& slots,
                     bool swapped = false) {
  std::array<int, kSlotCount> order = {0, 1, 2, 3, 4};
  if (swapped) std::swap(order[1], order[3]);
  std::string s = "the";
  for (int pos = 0; pos < kSlotCount; ++pos) {
    if (pos == 3) s += " the";  // the object slot gets its own article
    int slot = order[size_t(pos)];
    s += " " + word(topic, slot, slots[size_t(slot)]);
  }
  return s;
}

std::array<int, kSlotCount> random_slots(Rng& rng) {
  std::array<int, kSlotCount> slots;
  for (int& s : slots) s = int(rng.uniform_int(kWordsPerSlot));
  return slots;
}

std::string format_gold(int q) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%d.0", q);
  return buf;
}

}  // namespace

SynthPaths gen_corpus(const SynthSpec& spec) {
  if (spec.sentences < 100)
    raise(ErrorKind::Config,
          "gen-corpus needs at least 100 sentences, got " + std::to_string(spec.sentences));

  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  if (ec)
    raise(ErrorKind::Io,
          "cannot create output directory " + spec.out_dir + ": " + ec.message());

  Rng rng(spec.seed);

  // Corpus. A coverage block puts every bank word into the corpus so the vocabulary
  // build never maps generated text to the unknown token.
  std::string corpus;
  for (int t = 0; t < kTopicCount; ++t)
    for (int i = 0; i < kWordsPerSlot; ++i)
      corpus += sentence(t, {i, i, i, i, i}) + "\n";
  for (int k = kTopicCount * kWordsPerSlot; k < spec.sentences; ++k) {
    int t = int(rng.uniform_int(kTopicCount));
    bool swapped = rng.uniform_int(8) == 0;
    corpus += sentence(t, random_slots(rng), swapped) + "\n";
  }

  // Scored pairs: the second sentence keeps q of the 5 content slots and redraws the
  // rest to different words; q cycles 5..0 and q=0 switches topic outright. Every
  // seventh pair is a role swap instead: the identical bag of words with subject and
  // object exchanged, scored 1.0, so rank order is not recoverable from token overlap
  // alone.
  int pair_count = std::max(60, spec.sentences / 4);
  std::string pairs;
  for (int k = 0; k < pair_count; ++k) {
    int kind = k % 7;
    int topic = int(rng.uniform_int(kTopicCount));
    std::array<int, kSlotCount> a = random_slots(rng);
    std::string line = sentence(topic, a) + "\t";
    if (kind == 6) {
      pairs += line + sentence(topic, a, true) + "\t1.0\n";
      continue;
    }
    int q = 5 - kind;
    if (q == 0) {
      int other = (topic + 1 + int(rng.uniform_int(kTopicCount - 1))) % kTopicCount;
      line += sentence(other, random_slots(rng));
    } else {
      std::vector<int> positions = {0, 1, 2, 3, 4};
      rng.shuffle(positions);
      std::array<int, kSlotCount> b = a;
      for (int p = q; p < kSlotCount; ++p) {
        int slot = positions[size_t(p)];
        b[size_t(slot)] = (a[size_t(slot)] + 1 + int(rng.uniform_int(kWordsPerSlot - 1))) %
                          kWordsPerSlot;
      }
      line += sentence(topic, b);
    }
    pairs += line + "\t" + format_gold(q) + "\n";
  }

  // Labeled sets: topic classification, labels cycled so every class is present.
  auto labeled = [&](int count) {
    std::string out;
    for (int k = 0; k < count; ++k) {
      int t = k % kTopicCount;
      out += std::to_string(t) + "\t" + sentence(t, random_slots(rng)) + "\n";
    }
    return out;
  };
  std::string train = labeled(std::max(80, spec.sentences / 8));
  std::string test = labeled(std::max(40, spec.sentences / 16));

  SynthPaths paths;
  paths.corpus = spec.out_dir + "/corpus.txt";
  paths.eval_pairs = spec.out_dir + "/eval_pairs.tsv";
  paths.labeled_train = spec.out_dir + "/labeled_train.tsv";
  paths.labeled_test = spec.out_dir + "/labeled_test.tsv";
  write_file_atomic(paths.corpus, corpus);
  write_file_atomic(paths.eval_pairs, pairs);
  write_file_atomic(paths.labeled_train, train);
  write_file_atomic(paths.labeled_test, test);
  return paths;
}

}  // namespace spcse
