#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "spcse/checkpoint.hpp"
#include "spcse/data.hpp"
#include "spcse/eval.hpp"
#include "spcse/losses.hpp"
#include "spcse/model.hpp"
#include "spcse/runconfig.hpp"
#include "spcse/scoring.hpp"
#include "spcse/synth.hpp"

namespace py = pybind11;
using namespace spcse;

namespace {

using FloatArray = py::array_t<real, py::array::c_style | py::array::forcecast>;

Mat to_mat(const FloatArray& a, const char* name) {
  if (a.ndim() != 2) raise(ErrorKind::Shape, std::string(name) + " must be a 2-D array");
  Mat m(a.shape(0), a.shape(1));
  std::memcpy(m.data(), a.data(), sizeof(real) * size_t(a.size()));
  return m;
}

py::array_t<real> to_array(const Mat& m) {
  py::array_t<real> a({m.rows(), m.cols()});
  std::memcpy(a.mutable_data(), m.data(), sizeof(real) * size_t(m.size()));
  return a;
}

struct LoadedModel {
  Checkpoint ckpt;
  Vocab vocab;
};

LoadedModel load_with_vocab(const std::string& checkpoint_path) {
  LoadedModel lm;
  lm.ckpt = load_checkpoint(checkpoint_path);
  const std::string& corpus_path = lm.ckpt.config.paths.corpus;
  if (corpus_path.empty())
    raise(ErrorKind::Config, "checkpoint config has no corpus path to build a vocabulary from");
  lm.vocab = build_vocab(load_corpus(corpus_path), lm.ckpt.config.model.vocab_size);
  return lm;
}

py::dict row_to_dict(const EvalRow& r) {
  py::dict d;
  d["s"] = r.s;
  d["lambda"] = r.has_lambda ? py::object(py::float_(r.lambda)) : py::object(py::none());
  d["spearman"] =
      r.sts.rho_defined ? py::object(py::float_(r.sts.rho)) : py::object(py::none());
  d["alignment"] = r.sts.alignment;
  d["uniformity"] = r.sts.uniformity;
  d["probe_accuracy"] =
      r.has_probe ? py::object(py::float_(r.probe_accuracy)) : py::object(py::none());
  d["wallclock_s"] = r.wallclock_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_spcse, m) {
  m.doc() = "Contrastive sentence-embedding lab: losses, metrics, synthetic corpora, "
            "checkpoint inspection, importance scoring, and the prune/rewind sweep.";

  py::register_exception<Error>(m, "SpcseError");

  // ---- losses and metrics -------------------------------------------------
  m.def(
      "contrastive_loss",
      [](const FloatArray& h, const FloatArray& hp, double tau) {
        return contrastive_loss(to_mat(h, "h"), to_mat(hp, "h_plus"), tau);
      },
      py::arg("h"), py::arg("h_plus"), py::arg("tau") = 0.05,
      "In-batch InfoNCE over cosine similarities; rows are paired by index.");
  m.def(
      "alignment_loss",
      [](const FloatArray& h, const FloatArray& hp, double eps_log) {
        return alignment_loss(to_mat(h, "h"), to_mat(hp, "h_plus"), eps_log);
      },
      py::arg("h"), py::arg("h_plus"), py::arg("eps_log") = 1e-12,
      "log mean squared distance between paired rows (rows used as given).");
  m.def(
      "uniformity_loss",
      [](const FloatArray& h) { return uniformity_loss(to_mat(h, "h")); }, py::arg("h"),
      "log mean Gaussian-kernel similarity over unordered row pairs.");
  m.def(
      "normalize_rows",
      [](const FloatArray& h) { return to_array(normalize_rows(to_mat(h, "h"))); },
      py::arg("h"));
  m.def("spearman", &spearman, py::arg("x"), py::arg("y"),
        "Rank correlation with average ties; constant input raises SpcseError.");

  // ---- synthetic data -----------------------------------------------------
  m.def(
      "gen_corpus",
      [](const std::string& out_dir, int sentences, uint64_t seed) {
        SynthSpec spec;
        spec.out_dir = out_dir;
        spec.sentences = sentences;
        spec.seed = seed;
        SynthPaths p = gen_corpus(spec);
        py::dict d;
        d["corpus"] = p.corpus;
        d["eval_pairs"] = p.eval_pairs;
        d["labeled_train"] = p.labeled_train;
        d["labeled_test"] = p.labeled_test;
        return d;
      },
      py::arg("out_dir"), py::arg("sentences") = 2000, py::arg("seed") = 42,
      "Write the synthetic corpus, scored pairs, and labeled splits; returns their paths.");

  // ---- configuration ------------------------------------------------------
  m.def(
      "default_config", [] { return RunConfig{}.to_json_string(); },
      "Canonical JSON for the default run configuration.");
  m.def(
      "load_config",
      [](const std::string& path) { return RunConfig::load_file(path).to_json_string(); },
      py::arg("path"), "Parse, validate, and canonicalize a config file.");
  m.def(
      "override_config",
      [](const std::string& json_text, const std::vector<std::string>& assignments) {
        RunConfig rc = RunConfig::from_json_string(json_text);
        for (const std::string& a : assignments) rc.apply_override(a);
        rc.validate();
        return rc.to_json_string();
      },
      py::arg("config_json"), py::arg("assignments"),
      "Apply key=value overrides with dotted paths (e.g. train.learning_rate=0.01).");

  // ---- checkpoints --------------------------------------------------------
  m.def(
      "checkpoint_info",
      [](const std::string& path) {
        Checkpoint c = load_checkpoint(path);
        py::dict d;
        d["step"] = c.step;
        d["params"] = param_count(c.weights);
        d["config"] = c.config.to_json_string();
        d["all_ones_masks"] = c.masks.all_ones();
        return d;
      },
      py::arg("path"));
  m.def(
      "embed",
      [](const std::string& checkpoint_path, const std::vector<std::string>& sentences) {
        LoadedModel lm = load_with_vocab(checkpoint_path);
        std::vector<std::vector<int>> toks;
        for (const std::string& s : sentences) toks.push_back(tokenize(s, lm.vocab));
        Mat out = embed_all(lm.ckpt.config.model, lm.ckpt.weights, &lm.ckpt.masks, toks);
        return to_array(out);
      },
      py::arg("checkpoint_path"), py::arg("sentences"),
      "CLS embeddings (n x d float32) with the checkpoint's masks applied; the "
      "vocabulary is rebuilt from the corpus recorded in the checkpoint config.");
  m.def(
      "eval_sts",
      [](const std::string& checkpoint_path, const std::string& pairs_path) {
        LoadedModel lm = load_with_vocab(checkpoint_path);
        TokenizedPairs tp = tokenize_pairs(load_scored_pairs(pairs_path), lm.vocab);
        StsReport r = eval_sts(lm.ckpt.config.model, lm.ckpt.weights, &lm.ckpt.masks, tp,
                               lm.ckpt.config.score.eps_log);
        py::dict d;
        d["spearman"] = r.rho_defined ? py::object(py::float_(r.rho)) : py::object(py::none());
        d["alignment"] = r.alignment;
        d["uniformity"] = r.uniformity;
        return d;
      },
      py::arg("checkpoint_path"), py::arg("pairs_path"));
  m.def(
      "importance",
      [](const std::string& checkpoint_path, const std::string& pairs_path, double lam,
         int batch_size) {
        LoadedModel lm = load_with_vocab(checkpoint_path);
        ScoreConfig sc = lm.ckpt.config.score;
        sc.lambda = lam;
        sc.batch_size = batch_size;
        ScoreTable t = estimate_importance(lm.ckpt.config.model, lm.ckpt.weights,
                                           MaskSet::full(lm.ckpt.config.model),
                                           load_scored_pairs(pairs_path), lm.vocab, sc);
        py::dict d;
        d["head_scores"] = t.head_scores;
        d["neuron_scores"] = t.neuron_scores;
        d["lambda"] = t.lambda;
        d["batches"] = t.batch_count;
        return d;
      },
      py::arg("checkpoint_path"), py::arg("pairs_path"), py::arg("lambda") = 0.5,
      py::arg("batch_size") = 32,
      "Mean absolute mask-gradient importance per head and neuron.");

  // ---- pipeline -----------------------------------------------------------
  m.def(
      "run_sweep",
      [](const std::string& config_json, int jobs) {
        RunConfig rc = RunConfig::from_json_string(config_json);
        SweepReport report;
        {
          py::gil_scoped_release release;
          report = run_sweep(rc, jobs);
        }
        py::list rows;
        for (const EvalRow& r : report.rows) rows.append(row_to_dict(r));
        return rows;
      },
      py::arg("config_json"), py::arg("jobs") = 1,
      "Full pipeline: pretrain, contrastive train, score, then prune/rewind/retrain and "
      "evaluate every sweep cell. Returns the report rows; artifacts land in "
      "paths.out_dir.");
}
