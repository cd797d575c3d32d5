#include "spcse/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

namespace spcse {

namespace {

std::ifstream open_or_raise(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path);
  return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<std::string> split_whitespace_lower(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

SentenceCorpus load_corpus(const std::string& path) {
  std::ifstream in = open_or_raise(path);
  SentenceCorpus corpus;
  corpus.source_path = path;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    corpus.sentences.push_back(line);
  }
  if (corpus.sentences.empty()) raise(ErrorKind::Data, "corpus " + path + " is empty");
  return corpus;
}

ScoredPairSet load_scored_pairs(const std::string& path) {
  std::ifstream in = open_or_raise(path);
  ScoredPairSet set;
  set.source_path = path;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3)
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                                  std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty())
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": empty sentence");
    double gold;
    try {
      size_t consumed = 0;
      gold = std::stod(fields[2], &consumed);
      if (consumed != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      raise(ErrorKind::Parse,
            path + ":" + std::to_string(line_no) + ": non-numeric score '" + fields[2] + "'");
    }
    if (!(gold >= 0.0 && gold <= 5.0))
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": score " + fields[2] +
                                  " outside [0, 5]");
    set.pairs.push_back({fields[0], fields[1], gold});
  }
  if (set.pairs.empty()) raise(ErrorKind::Data, "pair file " + path + " has no rows");
  return set;
}

LabeledSet load_labeled(const std::string& path) {
  std::ifstream in = open_or_raise(path);
  LabeledSet set;
  set.source_path = path;
  std::string line;
  int line_no = 0;
  int max_label = -1;
  std::vector<bool> seen;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": expected 2 fields, got " +
                                  std::to_string(fields.size()));
    int label;
    try {
      size_t consumed = 0;
      label = std::stoi(fields[0], &consumed);
      if (consumed != fields[0].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      raise(ErrorKind::Parse,
            path + ":" + std::to_string(line_no) + ": non-integer label '" + fields[0] + "'");
    }
    if (label < 0)
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": negative label");
    if (fields[1].empty())
      raise(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": empty sentence");
    if (label >= int(seen.size())) seen.resize(size_t(label) + 1, false);
    seen[size_t(label)] = true;
    max_label = std::max(max_label, label);
    set.examples.push_back({fields[1], label});
  }
  if (set.examples.empty()) raise(ErrorKind::Data, "labeled file " + path + " has no rows");
  for (int c = 0; c <= max_label; ++c)
    if (!seen[size_t(c)])
      raise(ErrorKind::Data,
            path + ": labels not dense, class " + std::to_string(c) + " missing");
  set.num_classes = max_label + 1;
  return set;
}

Vocab build_vocab(const SentenceCorpus& corpus, int max_size) {
  if (corpus.sentences.empty()) raise(ErrorKind::Data, "build_vocab: empty corpus");
  if (max_size <= 4)
    raise(ErrorKind::Config, "build_vocab: max_size must exceed the 4 reserved ids");
  std::unordered_map<std::string, int64_t> freq;
  for (const std::string& s : corpus.sentences)
    for (const std::string& tok : split_whitespace_lower(s)) ++freq[tok];

  std::vector<std::pair<std::string, int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.id_to_token = {"<pad>", "<cls>", "<mask>", "<unk>"};
  v.token_to_id = {{"<pad>", kPadId}, {"<cls>", kClsId}, {"<mask>", kMaskId}, {"<unk>", kUnkId}};
  size_t budget = size_t(max_size) - 4;
  size_t accepted = 0;
  for (const auto& [tok, f] : ranked) {
    if (accepted >= budget) break;
    auto [it, inserted] = v.token_to_id.emplace(tok, int(v.id_to_token.size()));
    if (!inserted) continue;  // a literal like "<unk>" in the corpus keeps its reserved id
    v.id_to_token.push_back(tok);
    ++accepted;
  }
  return v;
}

std::vector<int> tokenize(const std::string& sentence, const Vocab& vocab) {
  std::vector<int> ids;
  for (const std::string& tok : split_whitespace_lower(sentence)) {
    auto it = vocab.token_to_id.find(tok);
    // PAD/CLS/MASK are never emitted for content; anything mapping below UNK falls back.
    int id = it == vocab.token_to_id.end() ? kUnkId : it->second;
    ids.push_back(id < kUnkId ? kUnkId : id);
  }
  return ids;
}

std::vector<std::vector<int>> make_batches(int count, int batch_size, uint64_t epoch_seed) {
  if (batch_size < 2)
    raise(ErrorKind::Config, "batch_size must be at least 2 for in-batch negatives");
  if (count <= 0) raise(ErrorKind::Data, "make_batches: empty corpus");
  std::vector<int> perm(static_cast<size_t>(count));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(epoch_seed);
  rng.shuffle(perm);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < count; start += batch_size) {
    int end = std::min(count, start + batch_size);
    if (end - start < 2) break;  // drop a trailing singleton
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

}  // namespace spcse
