#pragma once

#include <string>
#include <vector>

#include "spcse/model.hpp"
#include "spcse/pruning.hpp"
#include "spcse/scoring.hpp"
#include "spcse/train.hpp"

namespace spcse {

struct SweepConfig {
  std::vector<double> sparsity_grid = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07,
                                       0.08, 0.09, 0.10, 0.20, 0.30, 0.40, 0.50};
  std::vector<double> lambda_grid = {0.25, 0.5, 0.75};

  void validate() const;
};

struct PathsConfig {
  std::string corpus;
  std::string eval_pairs;
  std::string score_pairs;  // empty: fall back to eval_pairs
  std::string labeled_train;
  std::string labeled_test;
  std::string eval_model;  // empty: <out_dir>/final.spcs
  std::string out_dir = "out";
};

// The whole run configuration, serialized as one JSON document. Unknown keys anywhere
// in the document are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ScoreConfig score;
  SparsitySpec prune;
  SweepConfig sweep;
  PathsConfig paths;

  void validate() const;

  std::string to_json_string() const;  // canonical form (sorted keys, stable floats)
  static RunConfig from_json_string(const std::string& text);
  static RunConfig load_file(const std::string& path);

  // key=value with dotted paths, e.g. train.learning_rate=0.01 or
  // sweep.lambda_grid=[0.5]; the key must already exist in the document.
  void apply_override(const std::string& assignment);
};

}  // namespace spcse
