#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spcse/checkpoint.hpp"
#include "spcse/data.hpp"
#include "spcse/eval.hpp"
#include "spcse/losses.hpp"
#include "spcse/model.hpp"
#include "spcse/pruning.hpp"
#include "spcse/runconfig.hpp"
#include "spcse/scoring.hpp"
#include "spcse/synth.hpp"
#include "spcse/train.hpp"

namespace spcse {
namespace {

struct StageOpts {
  std::string config;
  std::vector<std::string> overrides;
  int jobs = 1;
  std::vector<uint64_t> seeds;
  bool dry_run = false;
};

void ensure_out_dir(const RunConfig& rc) {
  std::error_code ec;
  std::filesystem::create_directories(rc.paths.out_dir, ec);
  if (ec)
    raise(ErrorKind::Io,
          "cannot create output directory " + rc.paths.out_dir + ": " + ec.message());
}

std::string require_input(const std::string& path, const std::string& key) {
  if (path.empty()) raise(ErrorKind::Config, key + " must be set for this command");
  if (!file_exists(path)) raise(ErrorKind::Io, "input file " + path + " does not exist");
  return path;
}

std::string score_pairs_path(const RunConfig& rc) {
  return rc.paths.score_pairs.empty() ? rc.paths.eval_pairs : rc.paths.score_pairs;
}

// Data files each command reads; checked up front and by --dry-run. Upstream stage
// artifacts are checked at open time instead, so a dry run can plan a pipeline whose
// earlier stages have not run yet.
std::vector<std::pair<std::string, std::string>> stage_inputs(const std::string& stage,
                                                              const RunConfig& rc) {
  std::vector<std::pair<std::string, std::string>> in;
  in.emplace_back("paths.corpus", rc.paths.corpus);
  if (stage == "score" || stage == "sweep")
    in.emplace_back(rc.paths.score_pairs.empty() ? "paths.eval_pairs" : "paths.score_pairs",
                    score_pairs_path(rc));
  if (stage == "eval" || stage == "sweep")
    in.emplace_back("paths.eval_pairs", rc.paths.eval_pairs);
  if ((stage == "eval" || stage == "sweep") && !rc.paths.labeled_train.empty() &&
      !rc.paths.labeled_test.empty()) {
    in.emplace_back("paths.labeled_train", rc.paths.labeled_train);
    in.emplace_back("paths.labeled_test", rc.paths.labeled_test);
  }
  return in;
}

struct TextInputs {
  SentenceCorpus corpus;
  Vocab vocab;
  std::vector<std::vector<int>> tokens;
};

TextInputs load_text(const RunConfig& rc) {
  TextInputs t;
  t.corpus = load_corpus(rc.paths.corpus);
  t.vocab = build_vocab(t.corpus, rc.model.vocab_size);
  t.tokens = tokenize_corpus(t.corpus, t.vocab, rc.model.max_seq_len);
  return t;
}

Checkpoint need_artifact(const std::string& path, const std::string& producer) {
  if (!file_exists(path))
    raise(ErrorKind::Dependency,
          path + " not found; run `spcse " + producer + "` first");
  return load_checkpoint(path);
}

void check_model_echo(const RunConfig& current, const RunConfig& embedded,
                      const std::string& path) {
  if (model_config_hash(current.model) != model_config_hash(embedded.model))
    raise(ErrorKind::Compatibility,
          "model config does not match the one embedded in " + path);
}

void cmd_pretrain(const RunConfig& rc, const StageOpts&) {
  TextInputs text = load_text(rc);
  ensure_out_dir(rc);
  EncoderWeights weights = init_model(rc.model);
  MaskSet full = MaskSet::full(rc.model);
  TrainLog log;
  RewindCheckpoint rewind = pretrain_mlm(rc.model, weights, text.tokens, rc.train, &log);
  const std::string od = rc.paths.out_dir;
  save_checkpoint(od + "/pretrained.spcs",
                  {rc, weights, full, uint64_t(rc.train.pretrain_steps)});
  save_checkpoint(od + "/rewind.spcs", {rc, rewind.weights, full, uint64_t(rewind.step)});
  write_file_atomic(od + "/pretrain_log.csv", log.to_csv());
  log_info("pretrain: wrote " + od + "/pretrained.spcs and " + od + "/rewind.spcs");
}

void cmd_train(const RunConfig& rc, const StageOpts&) {
  TextInputs text = load_text(rc);
  ensure_out_dir(rc);
  const std::string od = rc.paths.out_dir;
  Checkpoint ck = need_artifact(od + "/pretrained.spcs", "pretrain");
  check_model_echo(rc, ck.config, od + "/pretrained.spcs");
  EncoderWeights weights = ck.weights;
  TrainLog log;
  train_contrastive(rc.model, weights, text.tokens, rc.train, MaskSet::full(rc.model), &log);
  save_checkpoint(od + "/trained.spcs",
                  {rc, weights, MaskSet::full(rc.model),
                   uint64_t(rc.train.pretrain_steps + rc.train.contrastive_steps)});
  write_file_atomic(od + "/train_log.csv", log.to_csv());
  log_info("train: wrote " + od + "/trained.spcs");
}

void cmd_score(const RunConfig& rc, const StageOpts&) {
  TextInputs text = load_text(rc);
  ensure_out_dir(rc);
  const std::string od = rc.paths.out_dir;
  Checkpoint ck = need_artifact(od + "/trained.spcs", "train");
  check_model_echo(rc, ck.config, od + "/trained.spcs");
  ScoredPairSet pairs = load_scored_pairs(score_pairs_path(rc));
  ScoreTable table = estimate_importance(rc.model, ck.weights, MaskSet::full(rc.model),
                                         pairs, text.vocab, rc.score);
  write_score_csv(od + "/scores.csv", table);
  log_info("score: wrote " + od + "/scores.csv");
}

void cmd_prune(const RunConfig& rc, const StageOpts&) {
  ensure_out_dir(rc);
  const std::string od = rc.paths.out_dir;
  if (!file_exists(od + "/scores.csv"))
    raise(ErrorKind::Dependency,
          od + "/scores.csv not found; run `spcse score` first");
  ScoreTable table = read_score_csv(od + "/scores.csv");
  PruneDecision decision = select_prune_set(table, rc.prune);
  if (!decision.masks.shape_matches(rc.model))
    raise(ErrorKind::Compatibility,
          od + "/scores.csv does not match the configured model shape");
  write_decision_csv(od + "/decision.csv", table, decision);

  Checkpoint ck = need_artifact(od + "/trained.spcs", "train");
  check_model_echo(rc, ck.config, od + "/trained.spcs");
  CompactModel compacted = compact(rc.model, ck.weights, decision);
  double fraction =
      1.0 - double(param_count(compacted.weights)) / double(param_count(ck.weights));

  int head_pool = 0, neuron_pool = 0;
  for (int l = 0; l < rc.model.num_layers; ++l) {
    head_pool += rc.model.heads(l);
    neuron_pool += rc.model.ffn(l);
  }
  nlohmann::json summary{{"sparsity", decision.sparsity},
                         {"heads_pruned", decision.pruned_heads.size()},
                         {"head_pool", head_pool},
                         {"head_threshold", decision.head_threshold},
                         {"neurons_pruned", decision.pruned_neurons.size()},
                         {"neuron_pool", neuron_pool},
                         {"neuron_threshold", decision.neuron_threshold},
                         {"parameter_fraction_pruned", fraction}};
  write_file_atomic(od + "/prune_summary.json", summary.dump(2) + "\n");
  log_info("prune: wrote " + od + "/decision.csv and " + od + "/prune_summary.json");
}

void cmd_rewind(const RunConfig& rc, const StageOpts&) {
  TextInputs text = load_text(rc);
  ensure_out_dir(rc);
  const std::string od = rc.paths.out_dir;
  Checkpoint rw_ck = need_artifact(od + "/rewind.spcs", "pretrain");
  check_model_echo(rc, rw_ck.config, od + "/rewind.spcs");
  if (!file_exists(od + "/decision.csv"))
    raise(ErrorKind::Dependency,
          od + "/decision.csv not found; run `spcse prune` first");
  PruneDecision decision = read_decision_csv(od + "/decision.csv");
  if (!decision.masks.shape_matches(rc.model))
    raise(ErrorKind::Compatibility,
          od + "/decision.csv does not match the configured model shape");

  RewindCheckpoint rewind{rw_ck.weights, int(rw_ck.step),
                          model_config_hash(rw_ck.config.model)};
  TrainLog log;
  EncoderWeights final_w =
      rewind_and_retrain(rc.model, decision.masks, rewind, text.tokens, rc.train, &log);
  save_checkpoint(od + "/final.spcs",
                  {rc, final_w, decision.masks,
                   uint64_t(rewind.step + rc.train.contrastive_steps)});
  write_file_atomic(od + "/retrain_log.csv", log.to_csv());
  log_info("rewind: wrote " + od + "/final.spcs");
}

void cmd_eval(const RunConfig& rc, const StageOpts&) {
  TextInputs text = load_text(rc);
  ensure_out_dir(rc);
  const std::string od = rc.paths.out_dir;
  std::string model_path =
      rc.paths.eval_model.empty() ? od + "/final.spcs" : rc.paths.eval_model;
  Checkpoint ck = need_artifact(model_path, "rewind");
  check_model_echo(rc, ck.config, model_path);

  TokenizedPairs pairs =
      tokenize_pairs(load_scored_pairs(rc.paths.eval_pairs), text.vocab);
  StsReport sts = eval_sts(rc.model, ck.weights, &ck.masks, pairs, rc.score.eps_log);

  bool probe = !rc.paths.labeled_train.empty() && !rc.paths.labeled_test.empty();
  double probe_accuracy = 0.0;
  if (probe)
    probe_accuracy =
        linear_probe(rc.model, ck.weights, &ck.masks, text.vocab,
                     load_labeled(rc.paths.labeled_train),
                     load_labeled(rc.paths.labeled_test));

  int64_t mask_zeros = 0, mask_total = 0;
  for (const Mat& m : ck.masks.head_masks) {
    mask_zeros += (m.array() == real(0)).count();
    mask_total += m.size();
  }
  for (const Mat& m : ck.masks.neuron_masks) {
    mask_zeros += (m.array() == real(0)).count();
    mask_total += m.size();
  }

  nlohmann::json report{{"model", model_path},
                        {"step", ck.step},
                        {"sparsity", rc.prune.s},
                        {"lambda", rc.score.lambda},
                        {"mask_zero_fraction", double(mask_zeros) / double(mask_total)},
                        {"spearman_defined", sts.rho_defined},
                        {"spearman", sts.rho},
                        {"alignment", sts.alignment},
                        {"uniformity", sts.uniformity}};
  if (probe) report["probe_accuracy"] = probe_accuracy;
  write_file_atomic(od + "/eval.json", report.dump(2) + "\n");
  log_info("eval: wrote " + od + "/eval.json");
  if (!sts.rho_defined)
    raise(ErrorKind::Metric,
          "spearman is undefined on this model (degenerate predictions); " + od +
              "/eval.json was still written");
}

void cmd_sweep(const RunConfig& rc, const StageOpts& opts) {
  run_sweep(rc, opts.jobs);
  log_info("sweep: wrote " + rc.paths.out_dir + "/sweep.csv");
}

using StageFn = std::function<void(const RunConfig&, const StageOpts&)>;

int run_stage(const std::string& name, const StageFn& fn, const StageOpts& opts) {
  RunConfig rc = RunConfig::load_file(opts.config);
  for (const std::string& ov : opts.overrides) rc.apply_override(ov);

  auto run_one = [&](const RunConfig& cfg) {
    for (const auto& [key, path] : stage_inputs(name, cfg)) require_input(path, key);
    if (opts.dry_run) {
      std::fputs(cfg.to_json_string().c_str(), stdout);
      return;
    }
    fn(cfg, opts);
  };

  if (opts.seeds.empty()) {
    run_one(rc);
    return 0;
  }
  for (uint64_t seed : opts.seeds) {
    RunConfig per_seed = rc;
    per_seed.model.seed = seed;
    per_seed.train.seed = seed;
    per_seed.paths.out_dir = rc.paths.out_dir + "/seed" + std::to_string(seed);
    log_info(name + ": seed " + std::to_string(seed));
    run_one(per_seed);
  }
  return 0;
}

}  // namespace
}  // namespace spcse

int main(int argc, char** argv) {
  using namespace spcse;

  CLI::App app{"sparse contrastive sentence-embedding laboratory"};
  app.require_subcommand(1);

  SynthSpec synth;
  CLI::App* gen = app.add_subcommand(
      "gen-corpus", "generate a synthetic corpus, scored pairs, and labeled sets");
  gen->add_option("--out", synth.out_dir, "output directory")->capture_default_str();
  gen->add_option("--sentences", synth.sentences, "corpus size (>= 100)")
      ->capture_default_str();
  gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();

  struct Stage {
    CLI::App* sub;
    std::shared_ptr<StageOpts> opts;
    StageFn fn;
    std::string name;
  };
  std::vector<Stage> stages;
  auto add_stage = [&](const std::string& name, const char* desc, StageFn fn) {
    CLI::App* sub = app.add_subcommand(name, desc);
    auto opts = std::make_shared<StageOpts>();
    sub->add_option("--config", opts->config, "JSON run configuration")->required();
    sub->add_option("--override", opts->overrides,
                    "key=value config override with dotted keys (repeatable)");
    sub->add_option("--jobs", opts->jobs, "worker threads for sweep cells")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seeds", opts->seeds,
                    "comma-separated seed list; repeats the command per seed under "
                    "<out_dir>/seed<N>")
        ->delimiter(',');
    sub->add_flag("--dry-run", opts->dry_run,
                  "validate config and input files, print the effective config, exit");
    stages.push_back({sub, opts, std::move(fn), name});
  };

  add_stage("pretrain", "masked-token pretraining; writes pretrained.spcs and rewind.spcs",
            cmd_pretrain);
  add_stage("train", "contrastive training on the pretrained model; writes trained.spcs",
            cmd_train);
  add_stage("score", "importance scores for every head and neuron; writes scores.csv",
            cmd_score);
  add_stage("prune",
            "sparsity-constrained prune decision; writes decision.csv and prune_summary.json",
            cmd_prune);
  add_stage("rewind", "rewind to the early snapshot and retrain pruned; writes final.spcs",
            cmd_rewind);
  add_stage("eval", "Spearman/alignment/uniformity/probe evaluation; writes eval.json",
            cmd_eval);
  add_stage("sweep", "full sparsity/lambda sweep; writes sweep.csv, curves, scatter",
            cmd_sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      SynthPaths paths = gen_corpus(synth);
      std::printf("%s\n%s\n%s\n%s\n", paths.corpus.c_str(), paths.eval_pairs.c_str(),
                  paths.labeled_train.c_str(), paths.labeled_test.c_str());
      return 0;
    }
    for (const Stage& stage : stages)
      if (stage.sub->parsed()) return run_stage(stage.name, stage.fn, *stage.opts);
  } catch (const Error& e) {
    log_error(e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    log_error(std::string("unexpected error: ") + e.what());
    return 1;
  }
  return 2;
}
