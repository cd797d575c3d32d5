#include "spcse/runconfig.hpp"

#include <set>

#include <json.hpp>

namespace spcse {

using nlohmann::json;

void SweepConfig::validate() const {
  if (sparsity_grid.empty()) raise(ErrorKind::Config, "sweep.sparsity_grid must be nonempty");
  if (lambda_grid.empty()) raise(ErrorKind::Config, "sweep.lambda_grid must be nonempty");
  for (double s : sparsity_grid)
    if (!(s >= 0.0 && s < 1.0))
      raise(ErrorKind::Config, "sweep.sparsity_grid values must lie in [0, 1)");
  for (double l : lambda_grid)
    if (!(l >= 0.0 && l <= 1.0))
      raise(ErrorKind::Config, "sweep.lambda_grid values must lie in [0, 1]");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  score.validate();
  prune.validate();
  sweep.validate();
  if (paths.out_dir.empty()) raise(ErrorKind::Config, "paths.out_dir must be set");
}

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      raise(ErrorKind::Config, "unknown config key '" + where + "." + key + "'");
}

template <typename T>
void maybe(const json& obj, const char* key, T& field, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(field);
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, "config key '" + where + "." + key + "': " + e.what());
  }
}

json model_to_json(const ModelConfig& m) {
  json j{{"vocab_size", m.vocab_size},
         {"max_seq_len", m.max_seq_len},
         {"hidden_dim", m.hidden_dim},
         {"num_layers", m.num_layers},
         {"heads_per_layer", m.heads_per_layer},
         {"head_dim", m.head_dim},
         {"ffn_dim", m.ffn_dim},
         {"dropout_rate", m.dropout_rate},
         {"seed", m.seed}};
  if (!m.layer_heads.empty()) j["layer_heads"] = m.layer_heads;
  if (!m.layer_ffn.empty()) j["layer_ffn"] = m.layer_ffn;
  return j;
}

void model_from_json(const json& j, ModelConfig& m) {
  check_keys(j,
             {"vocab_size", "max_seq_len", "hidden_dim", "num_layers", "heads_per_layer",
              "head_dim", "ffn_dim", "dropout_rate", "seed", "layer_heads", "layer_ffn"},
             "model");
  maybe(j, "vocab_size", m.vocab_size, "model");
  maybe(j, "max_seq_len", m.max_seq_len, "model");
  maybe(j, "hidden_dim", m.hidden_dim, "model");
  maybe(j, "num_layers", m.num_layers, "model");
  maybe(j, "heads_per_layer", m.heads_per_layer, "model");
  maybe(j, "head_dim", m.head_dim, "model");
  maybe(j, "ffn_dim", m.ffn_dim, "model");
  maybe(j, "dropout_rate", m.dropout_rate, "model");
  maybe(j, "seed", m.seed, "model");
  maybe(j, "layer_heads", m.layer_heads, "model");
  maybe(j, "layer_ffn", m.layer_ffn, "model");
}

json train_to_json(const TrainConfig& t) {
  return json{{"temperature", t.temperature},
              {"learning_rate", t.learning_rate},
              {"batch_size", t.batch_size},
              {"pretrain_steps", t.pretrain_steps},
              {"contrastive_steps", t.contrastive_steps},
              {"rewind_step", t.rewind_step},
              {"adam_beta1", t.adam_beta1},
              {"adam_beta2", t.adam_beta2},
              {"adam_eps", t.adam_eps},
              {"seed", t.seed}};
}

void train_from_json(const json& j, TrainConfig& t) {
  check_keys(j,
             {"temperature", "learning_rate", "batch_size", "pretrain_steps",
              "contrastive_steps", "rewind_step", "adam_beta1", "adam_beta2", "adam_eps",
              "seed"},
             "train");
  maybe(j, "temperature", t.temperature, "train");
  maybe(j, "learning_rate", t.learning_rate, "train");
  maybe(j, "batch_size", t.batch_size, "train");
  maybe(j, "pretrain_steps", t.pretrain_steps, "train");
  maybe(j, "contrastive_steps", t.contrastive_steps, "train");
  maybe(j, "rewind_step", t.rewind_step, "train");
  maybe(j, "adam_beta1", t.adam_beta1, "train");
  maybe(j, "adam_beta2", t.adam_beta2, "train");
  maybe(j, "adam_eps", t.adam_eps, "train");
  maybe(j, "seed", t.seed, "train");
}

json score_to_json(const ScoreConfig& s) {
  return json{{"lambda", s.lambda},
              {"batch_size", s.batch_size},
              {"normalize_embeddings", s.normalize_embeddings},
              {"eps_log", s.eps_log}};
}

void score_from_json(const json& j, ScoreConfig& s) {
  check_keys(j, {"lambda", "batch_size", "normalize_embeddings", "eps_log"}, "score");
  maybe(j, "lambda", s.lambda, "score");
  maybe(j, "batch_size", s.batch_size, "score");
  maybe(j, "normalize_embeddings", s.normalize_embeddings, "score");
  maybe(j, "eps_log", s.eps_log, "score");
}

json paths_to_json(const PathsConfig& p) {
  return json{{"corpus", p.corpus},
              {"eval_pairs", p.eval_pairs},
              {"score_pairs", p.score_pairs},
              {"labeled_train", p.labeled_train},
              {"labeled_test", p.labeled_test},
              {"eval_model", p.eval_model},
              {"out_dir", p.out_dir}};
}

void paths_from_json(const json& j, PathsConfig& p) {
  check_keys(j,
             {"corpus", "eval_pairs", "score_pairs", "labeled_train", "labeled_test",
              "eval_model", "out_dir"},
             "paths");
  maybe(j, "corpus", p.corpus, "paths");
  maybe(j, "eval_pairs", p.eval_pairs, "paths");
  maybe(j, "score_pairs", p.score_pairs, "paths");
  maybe(j, "labeled_train", p.labeled_train, "paths");
  maybe(j, "labeled_test", p.labeled_test, "paths");
  maybe(j, "eval_model", p.eval_model, "paths");
  maybe(j, "out_dir", p.out_dir, "paths");
}

json config_to_json(const RunConfig& rc) {
  return json{{"model", model_to_json(rc.model)},
              {"train", train_to_json(rc.train)},
              {"score", score_to_json(rc.score)},
              {"prune", json{{"sparsity", rc.prune.s}}},
              {"sweep", json{{"sparsity_grid", rc.sweep.sparsity_grid},
                             {"lambda_grid", rc.sweep.lambda_grid}}},
              {"paths", paths_to_json(rc.paths)}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) raise(ErrorKind::Config, "config root must be a JSON object");
  check_keys(j, {"model", "train", "score", "prune", "sweep", "paths"}, "config");
  RunConfig rc;
  if (j.contains("model")) model_from_json(j.at("model"), rc.model);
  if (j.contains("train")) train_from_json(j.at("train"), rc.train);
  if (j.contains("score")) score_from_json(j.at("score"), rc.score);
  if (j.contains("prune")) {
    check_keys(j.at("prune"), {"sparsity"}, "prune");
    maybe(j.at("prune"), "sparsity", rc.prune.s, "prune");
  }
  if (j.contains("sweep")) {
    check_keys(j.at("sweep"), {"sparsity_grid", "lambda_grid"}, "sweep");
    maybe(j.at("sweep"), "sparsity_grid", rc.sweep.sparsity_grid, "sweep");
    maybe(j.at("sweep"), "lambda_grid", rc.sweep.lambda_grid, "sweep");
  }
  if (j.contains("paths")) paths_from_json(j.at("paths"), rc.paths);
  rc.validate();
  return rc;
}

}  // namespace

std::string RunConfig::to_json_string() const { return config_to_json(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig RunConfig::load_file(const std::string& path) {
  if (!file_exists(path)) raise(ErrorKind::Io, "config file " + path + " does not exist");
  return from_json_string(read_file(path));
}

void RunConfig::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    raise(ErrorKind::Config, "override must look like section.key=value: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string value_text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // unquoted strings (e.g. paths) pass through verbatim
  }

  json doc = config_to_json(*this);
  json* node = &doc;
  size_t start = 0;
  for (;;) {
    size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(key))
      raise(ErrorKind::Config, "unknown config key '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
  *this = config_from_json(doc);
}

}  // namespace spcse
