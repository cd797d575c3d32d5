#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "spcse/data.hpp"
#include "spcse/runconfig.hpp"

using namespace spcse;
namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("SPCSE_BIN");
  REQUIRE_MESSAGE(b != nullptr, "SPCSE_BIN must point at the spcse binary");
  return b;
}

int run_cli(const std::string& args) {
  std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

const std::string kRoot = "/tmp/spcse_cli_test";

struct Workspace {
  Workspace() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    REQUIRE(run_cli("gen-corpus --out " + kRoot + "/data --sentences 120 --seed 9") == 0);
  }
};

Workspace& workspace() {
  static Workspace ws;  // one corpus for every CLI case
  return ws;
}

RunConfig mini_config(const std::string& out_dir) {
  RunConfig rc;
  rc.model.vocab_size = 80;
  rc.model.max_seq_len = 8;
  rc.model.hidden_dim = 16;
  rc.model.num_layers = 1;
  rc.model.heads_per_layer = 4;
  rc.model.head_dim = 4;
  rc.model.ffn_dim = 16;
  rc.model.seed = 5;
  rc.train.batch_size = 4;
  rc.train.pretrain_steps = 6;
  rc.train.contrastive_steps = 6;
  rc.train.learning_rate = 1e-3;
  rc.train.seed = 6;
  rc.score.batch_size = 8;
  rc.prune.s = 0.25;
  rc.sweep.sparsity_grid = {0.25};
  rc.sweep.lambda_grid = {0.5};
  rc.paths.corpus = kRoot + "/data/corpus.txt";
  rc.paths.eval_pairs = kRoot + "/data/eval_pairs.tsv";
  rc.paths.labeled_train = kRoot + "/data/labeled_train.tsv";
  rc.paths.labeled_test = kRoot + "/data/labeled_test.tsv";
  rc.paths.out_dir = out_dir;
  return rc;
}

std::string write_config(const RunConfig& rc, const std::string& name) {
  std::string path = kRoot + "/" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << rc.to_json_string();
  REQUIRE(out.good());
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), path, " should exist");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char ch : text)
    if (ch == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run config JSON round trips and rejects unknown keys") {
  RunConfig rc = mini_config("/tmp/nowhere");
  std::string text = rc.to_json_string();
  RunConfig back = RunConfig::from_json_string(text);
  CHECK(back.to_json_string() == text);
  CHECK(back.model.hidden_dim == 16);
  CHECK(back.sweep.lambda_grid == std::vector<double>{0.5});

  CHECK_THROWS_AS(RunConfig::from_json_string("{\"model\":{\"bogus\":1}}"), Error);
  CHECK_THROWS_AS(RunConfig::from_json_string("{\"mystery_section\":{}}"), Error);
  CHECK_THROWS_AS(RunConfig::from_json_string("{not json"), Error);
  CHECK_THROWS_AS(RunConfig::from_json_string("{\"model\":{\"hidden_dim\":\"wide\"}}"),
                  Error);
  CHECK_THROWS_AS(RunConfig::load_file("/tmp/spcse_no_such_config.json"), Error);
}

TEST_CASE("config overrides navigate dotted paths and re-validate") {
  RunConfig rc = mini_config("/tmp/nowhere");
  rc.apply_override("train.learning_rate=0.5");
  CHECK(rc.train.learning_rate == 0.5);
  rc.apply_override("sweep.lambda_grid=[0.1,0.9]");
  CHECK(rc.sweep.lambda_grid == std::vector<double>{0.1, 0.9});
  rc.apply_override("paths.out_dir=/tmp/elsewhere");
  CHECK(rc.paths.out_dir == "/tmp/elsewhere");
  rc.apply_override("model.seed=77");
  CHECK(rc.model.seed == 77);

  CHECK_THROWS_AS(rc.apply_override("model.not_a_knob=3"), Error);
  CHECK_THROWS_AS(rc.apply_override("nonsense"), Error);  // no '='
  CHECK_THROWS_AS(rc.apply_override("train.batch_size=1"), Error);  // fails validation
  CHECK_THROWS_AS(rc.apply_override("score.lambda=2.0"), Error);

  SweepConfig sweep;
  sweep.sparsity_grid = {};
  CHECK_THROWS_AS(sweep.validate(), Error);
  sweep = SweepConfig{};
  sweep.sparsity_grid = {1.0};
  CHECK_THROWS_AS(sweep.validate(), Error);
  sweep = SweepConfig{};
  sweep.lambda_grid = {1.5};
  CHECK_THROWS_AS(sweep.validate(), Error);
}

TEST_CASE("gen-corpus is deterministic and emits loadable files") {
  workspace();
  REQUIRE(run_cli("gen-corpus --out " + kRoot + "/data2 --sentences 120 --seed 9") == 0);
  for (const char* name :
       {"corpus.txt", "eval_pairs.tsv", "labeled_train.tsv", "labeled_test.tsv"}) {
    CHECK(slurp(kRoot + "/data/" + name) == slurp(kRoot + "/data2/" + name));
  }
  REQUIRE(run_cli("gen-corpus --out " + kRoot + "/data3 --sentences 120 --seed 10") == 0);
  CHECK(slurp(kRoot + "/data/corpus.txt") != slurp(kRoot + "/data3/corpus.txt"));

  SentenceCorpus corpus = load_corpus(kRoot + "/data/corpus.txt");
  CHECK(corpus.sentences.size() == 120);
  ScoredPairSet pairs = load_scored_pairs(kRoot + "/data/eval_pairs.tsv");
  CHECK(pairs.pairs.size() >= 60);
  bool has_high = false, has_low = false;
  for (const ScoredPair& p : pairs.pairs) {
    if (p.gold >= 4.0) has_high = true;
    if (p.gold <= 1.0) has_low = true;
  }
  CHECK(has_high);  // alignment needs gold >= 4 rows
  CHECK(has_low);
  LabeledSet train = load_labeled(kRoot + "/data/labeled_train.tsv");
  CHECK(train.num_classes >= 2);
  CHECK(run_cli("gen-corpus --out " + kRoot + "/data4 --sentences 50 --seed 9") != 0);
}

TEST_CASE("stage chain produces its artifacts in order") {
  workspace();
  std::string od = kRoot + "/out";
  std::string cfg = write_config(mini_config(od), "mini.json");

  REQUIRE(run_cli("pretrain --config " + cfg) == 0);
  CHECK(fs::exists(od + "/pretrained.spcs"));
  CHECK(fs::exists(od + "/rewind.spcs"));
  CHECK(count_lines(slurp(od + "/pretrain_log.csv")) == 7);  // header + 6 steps

  REQUIRE(run_cli("train --config " + cfg) == 0);
  CHECK(fs::exists(od + "/trained.spcs"));
  CHECK(fs::exists(od + "/train_log.csv"));

  REQUIRE(run_cli("score --config " + cfg) == 0);
  CHECK(fs::exists(od + "/scores.csv"));

  REQUIRE(run_cli("prune --config " + cfg) == 0);
  CHECK(fs::exists(od + "/decision.csv"));
  std::string summary = slurp(od + "/prune_summary.json");
  CHECK(summary.find("\"sparsity\"") != std::string::npos);
  CHECK(summary.find("\"parameter_fraction_pruned\"") != std::string::npos);

  REQUIRE(run_cli("rewind --config " + cfg) == 0);
  CHECK(fs::exists(od + "/final.spcs"));
  CHECK(fs::exists(od + "/retrain_log.csv"));

  REQUIRE(run_cli("eval --config " + cfg) == 0);
  std::string report = slurp(od + "/eval.json");
  CHECK(report.find("\"spearman\"") != std::string::npos);
  CHECK(report.find("\"alignment\"") != std::string::npos);
  CHECK(report.find("\"uniformity\"") != std::string::npos);
  CHECK(report.find("\"probe_accuracy\"") != std::string::npos);
  CHECK(report.find("\"mask_zero_fraction\"") != std::string::npos);
}

TEST_CASE("exit codes follow the error taxonomy") {
  workspace();
  CHECK(run_cli("") == 2);            // missing subcommand
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("frobnicate") == 2);  // unknown subcommand

  // unknown config key -> config error (2)
  std::string bad = kRoot + "/bad.json";
  {
    std::ofstream out(bad);
    out << "{\"model\": {\"bogus_knob\": 3}}\n";
  }
  CHECK(run_cli("pretrain --config " + bad) == 2);
  CHECK(run_cli("pretrain --config " + kRoot + "/missing.json") == 3);

  // missing corpus file -> io/data error (3)
  RunConfig rc = mini_config(kRoot + "/out_missing");
  rc.paths.corpus = kRoot + "/no_such_corpus.txt";
  CHECK(run_cli("pretrain --config " + write_config(rc, "missing_corpus.json")) == 3);

  // dependency on an earlier stage -> 3
  RunConfig fresh = mini_config(kRoot + "/out_fresh");
  CHECK(run_cli("train --config " + write_config(fresh, "fresh.json")) == 3);
  CHECK(run_cli("eval --config " + write_config(fresh, "fresh.json")) == 3);

  // corrupted checkpoint -> integrity error (4)
  RunConfig corrupt = mini_config(kRoot + "/out_corrupt");
  std::string ccfg = write_config(corrupt, "corrupt.json");
  REQUIRE(run_cli("pretrain --config " + ccfg) == 0);
  {
    std::string path = kRoot + "/out_corrupt/pretrained.spcs";
    std::string bytes = slurp(path);
    bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x11);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
  }
  CHECK(run_cli("train --config " + ccfg) == 4);

  // config echo mismatch: artifacts built under one model shape, read under another -> 4
  RunConfig mismatch = mini_config(kRoot + "/out");  // reuse the trained stage chain
  mismatch.model.hidden_dim = 32;
  mismatch.model.head_dim = 8;
  CHECK(run_cli("train --config " + write_config(mismatch, "mismatch.json")) == 4);

  // undefined spearman (constant gold) -> metric error (5), report still written
  RunConfig metric = mini_config(kRoot + "/out_metric");
  metric.paths.eval_pairs = kRoot + "/const_gold.tsv";
  {
    std::ofstream out(kRoot + "/const_gold.tsv");
    out << "the suna2 sunn1 sunv3 the suno4 sunt5\tthe suna2 sunn1 sunv3 the suno4 sunt0\t4.5\n"
           "the raina2 rainn1 rainv3 the raino4 raint5\tthe raina2 rainn1 rainv3 the raino4 raint0\t4.5\n"
           "the snowa2 snown1 snowv3 the snowo4 snowt5\tthe snowa2 snown1 snowv3 the snowo4 snowt0\t4.5\n";
  }
  std::string mcfg = write_config(metric, "metric.json");
  REQUIRE(run_cli("pretrain --config " + mcfg) == 0);
  REQUIRE(run_cli("train --config " + mcfg) == 0);
  REQUIRE(run_cli("score --config " + mcfg) == 0);
  REQUIRE(run_cli("prune --config " + mcfg) == 0);
  REQUIRE(run_cli("rewind --config " + mcfg) == 0);
  CHECK(run_cli("eval --config " + mcfg) == 5);
  CHECK(fs::exists(kRoot + "/out_metric/eval.json"));
  CHECK(slurp(kRoot + "/out_metric/eval.json").find("\"spearman_defined\": false") !=
        std::string::npos);
}

TEST_CASE("dry-run validates without writing artifacts") {
  workspace();
  RunConfig rc = mini_config(kRoot + "/out_dry");
  std::string cfg = write_config(rc, "dry.json");
  CHECK(run_cli("pretrain --config " + cfg + " --dry-run") == 0);
  CHECK_FALSE(fs::exists(kRoot + "/out_dry/pretrained.spcs"));

  // dry-run still validates config and inputs
  RunConfig bad = rc;
  bad.paths.corpus = kRoot + "/nope.txt";
  CHECK(run_cli("pretrain --config " + write_config(bad, "dry_bad.json") + " --dry-run") ==
        3);
}

TEST_CASE("--override and --seeds change stage behavior") {
  workspace();
  RunConfig rc = mini_config(kRoot + "/out_ov");
  std::string cfg = write_config(rc, "ov.json");
  REQUIRE(run_cli("pretrain --config " + cfg + " --override train.pretrain_steps=3") == 0);
  CHECK(count_lines(slurp(kRoot + "/out_ov/pretrain_log.csv")) == 4);  // header + 3

  RunConfig seeded = mini_config(kRoot + "/out_seeds");
  std::string scfg = write_config(seeded, "seeds.json");
  REQUIRE(run_cli("pretrain --config " + scfg + " --seeds 11,12") == 0);
  CHECK(fs::exists(kRoot + "/out_seeds/seed11/pretrained.spcs"));
  CHECK(fs::exists(kRoot + "/out_seeds/seed12/pretrained.spcs"));
  CHECK(slurp(kRoot + "/out_seeds/seed11/pretrained.spcs") !=
        slurp(kRoot + "/out_seeds/seed12/pretrained.spcs"));
}

TEST_CASE("sweep emits the report and plot files") {
  workspace();
  RunConfig rc = mini_config(kRoot + "/out_sweep");
  std::string cfg = write_config(rc, "sweep.json");
  REQUIRE(run_cli("sweep --config " + cfg + " --jobs 2") == 0);

  std::string csv = slurp(kRoot + "/out_sweep/sweep.csv");
  CHECK(count_lines(csv) == 3);  // header + dense row + one (s, lambda) cell
  CHECK(csv.find("\n0,,") != std::string::npos);
  CHECK(csv.find("\n0.25,0.5,") != std::string::npos);

  std::string curve = slurp(kRoot + "/out_sweep/curve_lambda0.5.dat");
  CHECK(count_lines(curve) == 3);  // comment + dense point + one cell
  CHECK(curve.find("\n0 ") != std::string::npos);
  CHECK(fs::exists(kRoot + "/out_sweep/scatter.dat"));
  CHECK(fs::exists(kRoot + "/out_sweep/trained.spcs"));
  CHECK(fs::exists(kRoot + "/out_sweep/scores_lambda0.5.csv"));
}
