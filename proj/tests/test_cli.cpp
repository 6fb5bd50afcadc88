// End-to-end coverage of the command-line front end: exit codes, seeded
// reproducibility, and agreement between emitted files and the library.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cascade/data_io.hpp"
#include "cascade/training.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

std::string cli_path() {
  const char* p = std::getenv("CASCADE_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "CASCADE_CLI_PATH must point at the cascade binary");
  return p;
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "cascade_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string at(const std::string& name) { return (scratch_dir() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  const std::string out_path = at("stdout.txt");
  const std::string err_path = at("stderr.txt");
  const std::string cmd =
      "\"" + cli_path() + "\" " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> fields_of(const std::string& line, char sep = '\t') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t pos = std::min(line.find(sep, start), line.size());
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

bool close(double a, double b) { return std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(b)); }

constexpr const char* kMetricsHeader =
    "level\talpha\tfilter_loss\tefficiency_loss\tdensity\ttoken_accuracy\t"
    "sequence_accuracy\twall_ms";

// Shared across cases: the end-to-end artifacts written by the train case.
struct Artifacts {
  std::string train_tsv = at("train.tsv");
  std::string dev_tsv = at("dev.tsv");
  std::string config = at("train.cfg");
  std::string ckpt = at("model.ckpt");
  std::string metrics = at("metrics.tsv");
};

void make_datasets() {
  static bool done = false;
  if (done) return;
  const RunResult r = run("synth --out " + at("train.tsv") + " --dev-out " + at("dev.tsv") +
                          " --count 30 --dev-count 10 --order 1 --labels 3 --len-min 3 "
                          "--len-max 6 --scale 2 --noise 0.1 --seed 5");
  REQUIRE(r.code == 0);
  done = true;
}

void make_cascade() {
  static bool done = false;
  if (done) return;
  make_datasets();
  Artifacts a;
  spit(a.config,
       "# one filtering level, then the final predictor\n"
       "levels = 1\n"
       "epochs = 3\n"
       "lambda = 0.02\n"
       "tolerance = 0.2\n"
       "alpha_candidates = 0,0.4\n"
       "dimension = 4096\n"
       "final_epochs = 2\n");
  const RunResult r = run("train --data " + a.train_tsv + " --dev " + a.dev_tsv +
                          " --config " + a.config + " --out " + a.ckpt + " --metrics " +
                          a.metrics + " --seed 7");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code == 2);                       // a subcommand is required
  CHECK(run("frobnicate --out x").code == 2);     // unknown subcommand
  CHECK(run("synth").code == 2);                  // missing required --out
  CHECK(run("eval --model x").code == 2);         // missing required --data
  CHECK(run("synth --out x --bogus-flag 3").code == 2);
  // --dev is required for chain training even though grids do not need it.
  const RunResult r = run("train --data x.tsv");
  CHECK(r.code == 2);
  CHECK(r.err.find("--dev is required") != std::string::npos);
}

TEST_CASE("runtime failures exit with code 1 and explain themselves") {
  const RunResult missing = run("eval --model " + at("nope.ckpt") + " --data " +
                                at("nope.tsv") + " --metrics -");
  CHECK(missing.code == 1);
  CHECK(missing.err.rfind("error:", 0) == 0);

  // Inconsistent synth split flags are a config error, not a crash.
  const RunResult split = run("synth --out " + at("x.tsv") + " --dev-out " + at("y.tsv"));
  CHECK(split.code == 1);
  CHECK(split.err.find("--dev-count") != std::string::npos);

  const std::string bad = at("bad.tsv");
  spit(bad, "#K=3\n7:a\n");
  make_cascade();
  const RunResult parse = run("eval --model " + Artifacts{}.ckpt + " --data " + bad);
  CHECK(parse.code == 1);
  CHECK(parse.err.find("line 2") != std::string::npos);
}

TEST_CASE("synth writes seeded dataset splits") {
  make_datasets();
  Artifacts a;
  const SequenceDataset train = read_sequence_dataset(a.train_tsv);
  const SequenceDataset dev = read_sequence_dataset(a.dev_tsv);
  CHECK(train.num_labels == 3);
  CHECK(train.examples.size() == 30);
  CHECK(dev.examples.size() == 10);
  for (const SequenceExample& ex : train.examples) {
    CHECK(ex.truth.size() >= 3);
    CHECK(ex.truth.size() <= 6);
  }

  // Same seed, same bytes; the training split does not depend on whether a
  // dev split was carved after it.
  const RunResult again = run("synth --out " + at("train_b.tsv") +
                              " --count 30 --order 1 --labels 3 --len-min 3 --len-max 6 "
                              "--scale 2 --noise 0.1 --seed 5");
  REQUIRE(again.code == 0);
  CHECK(slurp(at("train_b.tsv")) == slurp(a.train_tsv));

  const RunResult other = run("synth --out " + at("train_c.tsv") +
                              " --count 30 --order 1 --labels 3 --len-min 3 --len-max 6 "
                              "--scale 2 --noise 0.1 --seed 6");
  REQUIRE(other.code == 0);
  CHECK(slurp(at("train_c.tsv")) != slurp(a.train_tsv));
}

TEST_CASE("train writes a checkpoint and per-level metrics, reproducibly") {
  make_cascade();
  Artifacts a;

  const std::vector<std::string> lines = lines_of(slurp(a.metrics));
  REQUIRE(lines.size() == 3);  // header, level 1, final
  CHECK(lines[0] == kMetricsHeader);
  const std::vector<std::string> level = fields_of(lines[1]);
  REQUIRE(level.size() == 8);
  CHECK(level[0] == "1");
  const std::vector<std::string> final_row = fields_of(lines[2]);
  CHECK(final_row[0] == "final");
  CHECK(final_row[7] == "0");  // wall_ms stays 0 without --timings

  // The checkpoint holds the trained cascade; its report matches the TSV.
  const TrainedCascade cascade = load_cascade(a.ckpt);
  REQUIRE(cascade.levels.size() == 1);
  CHECK(close(num(level[1]), cascade.levels[0].report.alpha));
  CHECK(close(num(level[2]), cascade.levels[0].report.dev_filter_loss));
  CHECK(close(num(level[3]), cascade.levels[0].report.dev_efficiency_loss));
  CHECK(close(num(level[4]), cascade.levels[0].report.dev_density));
  CHECK(close(num(level[5]), cascade.levels[0].report.dev_token_accuracy));
  CHECK(close(num(level[6]), cascade.levels[0].report.dev_sequence_accuracy));

  // The final row reports evaluate_cascade on the dev split.
  const CascadeEval ev = evaluate_cascade(cascade, read_sequence_dataset(a.dev_tsv));
  CHECK(close(num(final_row[4]), ev.final_density));
  CHECK(close(num(final_row[5]), ev.token_accuracy));
  CHECK(close(num(final_row[6]), ev.sequence_accuracy));
  // Noise 0.1 over 3 labels leaves plenty of signal for one level.
  CHECK(ev.token_accuracy > 0.7);

  // Identical flags and seed give byte-identical outputs.
  const RunResult rerun = run("train --data " + a.train_tsv + " --dev " + a.dev_tsv +
                              " --config " + a.config + " --out " + at("model_b.ckpt") +
                              " --metrics " + at("metrics_b.tsv") + " --seed 7");
  REQUIRE(rerun.code == 0);
  CHECK(slurp(at("model_b.ckpt")) == slurp(a.ckpt));
  CHECK(slurp(at("metrics_b.tsv")) == slurp(a.metrics));

  // A different seed changes the learned weights.
  const RunResult other = run("train --data " + a.train_tsv + " --dev " + a.dev_tsv +
                              " --config " + a.config + " --out " + at("model_c.ckpt") +
                              " --metrics " + at("metrics_c.tsv") + " --seed 8");
  REQUIRE(other.code == 0);
  CHECK(slurp(at("model_c.ckpt")) != slurp(a.ckpt));

  // Metrics go to stdout when asked.
  const RunResult to_stdout = run("train --data " + a.train_tsv + " --dev " + a.dev_tsv +
                                  " --config " + a.config + " --metrics - --seed 7");
  REQUIRE(to_stdout.code == 0);
  CHECK(to_stdout.out == slurp(a.metrics));
}

TEST_CASE("eval metrics and trace agree with the library") {
  make_cascade();
  Artifacts a;
  const std::string eval_tsv = at("eval.tsv");
  const std::string trace_tsv = at("trace.tsv");
  const RunResult r = run("eval --model " + a.ckpt + " --data " + a.dev_tsv + " --metrics " +
                          eval_tsv + " --trace " + trace_tsv);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const TrainedCascade cascade = load_cascade(a.ckpt);
  const SequenceDataset dev = read_sequence_dataset(a.dev_tsv);
  const CascadeEval ev = evaluate_cascade(cascade, dev);

  const std::vector<std::string> lines = lines_of(slurp(eval_tsv));
  REQUIRE(lines.size() == 2 + cascade.levels.size());
  CHECK(lines[0] == kMetricsHeader);
  for (std::size_t t = 0; t < cascade.levels.size(); ++t) {
    const std::vector<std::string> row = fields_of(lines[1 + t]);
    CHECK(row[0] == std::to_string(t + 1));
    CHECK(close(num(row[1]), cascade.levels[t].alpha));
    CHECK(close(num(row[2]), ev.level_filter_loss[t]));
    CHECK(close(num(row[3]), ev.level_efficiency_loss[t]));
    CHECK(close(num(row[4]), ev.level_density[t]));
  }
  const std::vector<std::string> final_row = fields_of(lines.back());
  CHECK(final_row[0] == "final");
  CHECK(close(num(final_row[5]), ev.token_accuracy));

  // The trace replays apply_cascade row for row.
  const std::vector<std::string> trace_lines = lines_of(slurp(trace_tsv));
  REQUIRE(trace_lines.size() > 1);
  CHECK(trace_lines[0] == "example\tlevel\tposition\tsurvivors\ttau\tkept_all");
  std::size_t row_idx = 1;
  for (std::size_t i = 0; i < dev.examples.size(); ++i) {
    std::vector<LevelTrace> trace;
    apply_cascade(cascade, dev.examples[i].input, &trace);
    for (std::size_t t = 0; t < trace.size(); ++t)
      for (std::size_t pos = 0; pos < trace[t].survivors.size(); ++pos) {
        REQUIRE(row_idx < trace_lines.size());
        const std::vector<std::string> row = fields_of(trace_lines[row_idx++]);
        REQUIRE(row.size() == 6);
        CHECK(row[0] == std::to_string(i));
        CHECK(row[1] == std::to_string(t + 1));
        CHECK(row[2] == std::to_string(pos));
        CHECK(row[3] == std::to_string(trace[t].survivors[pos]));
        CHECK(close(num(row[4]), trace[t].tau));
        CHECK(row[5] == (trace[t].kept_all ? "1" : "0"));
      }
  }
  CHECK(row_idx == trace_lines.size());
}

TEST_CASE("filter-stats sweeps alphas exactly like measure_meanmax") {
  make_cascade();
  Artifacts a;

  // A bare model checkpoint is accepted directly.
  const TrainedCascade cascade = load_cascade(a.ckpt);
  const std::string model_ckpt = at("final_model.ckpt");
  save_checkpoint(cascade.final_model, model_ckpt);

  const std::string fs_tsv = at("fstats.tsv");
  const RunResult r = run("filter-stats --model " + model_ckpt + " --data " + a.dev_tsv +
                          " --alphas 0,0.3,0.6 --out " + fs_tsv);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::vector<std::string> lines = lines_of(slurp(fs_tsv));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "alpha\tfilter_loss\tefficiency_loss");

  const SequenceDataset dev = read_sequence_dataset(a.dev_tsv);
  const std::vector<TrainExample> examples =
      make_examples(dev, cascade.final_model.num_labels(), cascade.final_model.order());
  const double alphas[3] = {0.0, 0.3, 0.6};
  for (int i = 0; i < 3; ++i) {
    const std::vector<std::string> row = fields_of(lines[1 + i]);
    REQUIRE(row.size() == 3);
    CHECK(close(num(row[0]), alphas[i]));
    const FilterStats stats = measure_meanmax(cascade.final_model, examples, alphas[i]);
    CHECK(close(num(row[1]), stats.mean_filter_loss));
    CHECK(close(num(row[2]), stats.mean_efficiency_loss));
  }

  // A cascade checkpoint falls back to its final model: identical table.
  const RunResult via_cascade = run("filter-stats --model " + a.ckpt + " --data " +
                                    a.dev_tsv + " --alphas 0,0.3,0.6 --out " +
                                    at("fstats_b.tsv"));
  REQUIRE(via_cascade.code == 0);
  CHECK(slurp(at("fstats_b.tsv")) == slurp(fs_tsv));
}

TEST_CASE("grid-bench emits the top-k comparison table") {
  const std::string csv = at("bench.csv");
  const RunResult r = run("grid-bench --rows 2 --cols 2 --labels 3 --count 3 --samples 40 "
                          "--seed 11 --out " + csv);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::vector<std::string> lines = lines_of(slurp(csv));
  REQUIRE(lines.size() == 4);  // header + one row per k = 1..labels
  CHECK(lines[0] == "top_k,ensemble_err,joint_mm_err,sub_best_err,sub_mean_err,sub_worst_err");
  double prev_joint = 1.0;
  for (int k = 1; k <= 3; ++k) {
    const std::vector<std::string> row = fields_of(lines[k], ',');
    REQUIRE(row.size() == 6);
    CHECK(row[0] == std::to_string(k));
    for (int c = 1; c < 6; ++c) {
      CHECK(num(row[c]) >= 0.0);
      CHECK(num(row[c]) <= 1.0);
    }
    // Keeping more states per node can only reduce the top-k error.
    CHECK(num(row[2]) <= prev_joint);
    prev_joint = num(row[2]);
    // The best single tree is no worse than the average tree.
    CHECK(num(row[3]) <= num(row[4]) + 1e-12);
    CHECK(num(row[4]) <= num(row[5]) + 1e-12);
  }
  // Keeping every state filters nothing, whatever the ranking.
  const std::vector<std::string> full = fields_of(lines[3], ',');
  for (int c = 1; c < 6; ++c) CHECK(num(full[c]) == 0.0);

  // Stdout and file output carry the same bytes.
  const RunResult to_stdout = run("grid-bench --rows 2 --cols 2 --labels 3 --count 3 "
                                  "--samples 40 --seed 11 --out -");
  REQUIRE(to_stdout.code == 0);
  CHECK(to_stdout.out == slurp(csv));
}

TEST_CASE("ensemble mode trains a grid cascade from config keys") {
  make_datasets();
  Artifacts a;
  const std::string cfg = at("grid.cfg");
  spit(cfg,
       "grid_rows = 2\n"
       "grid_cols = 2\n"
       "grid_labels = 2\n"
       "grid_train_count = 10\n"
       "grid_dev_count = 6\n"
       "grid_noise = 0.1\n"
       "epochs = 2\n"
       "lambda = 0.02\n"
       "alpha_candidates = 0,0.3\n"
       "tolerance = 1\n"
       "dimension = 2048\n");
  const std::string metrics = at("grid_metrics.tsv");
  const RunResult r = run("train --ensemble --data " + a.train_tsv + " --config " + cfg +
                          " --metrics " + metrics + " --seed 3");
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const std::vector<std::string> lines = lines_of(slurp(metrics));
  REQUIRE(lines.size() == 3);  // header, level 1, final
  CHECK(lines[0] == kMetricsHeader);
  CHECK(fields_of(lines[1])[0] == "1");
  const std::vector<std::string> final_row = fields_of(lines[2]);
  CHECK(final_row[0] == "final");
  // Grid cascades report truth recall in the sequence_accuracy column.
  CHECK(num(final_row[6]) >= 0.0);
  CHECK(num(final_row[6]) <= 1.0);

  const RunResult again = run("train --ensemble --data " + a.train_tsv + " --config " + cfg +
                              " --metrics " + at("grid_metrics_b.tsv") + " --seed 3");
  REQUIRE(again.code == 0);
  CHECK(slurp(at("grid_metrics_b.tsv")) == slurp(metrics));
}

TEST_CASE("config file mistakes are rejected with context") {
  make_datasets();
  Artifacts a;
  const std::string base = "train --data " + a.train_tsv + " --dev " + a.dev_tsv +
                           " --metrics " + at("cfg_err.tsv") + " --config ";

  const std::string cfg = at("bad.cfg");
  spit(cfg, "epochs = 2\nturbo = yes\n");
  RunResult r = run(base + cfg);
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown config key: turbo") != std::string::npos);

  spit(cfg, "epochs\n");
  r = run(base + cfg);
  CHECK(r.code == 1);
  CHECK(r.err.find("config line 1") != std::string::npos);

  spit(cfg, "epochs = 2\nepochs = 3\n");
  r = run(base + cfg);
  CHECK(r.code == 1);
  CHECK(r.err.find("duplicate key") != std::string::npos);

  spit(cfg, "epochs = nope\n");
  r = run(base + cfg);
  CHECK(r.code == 1);
  CHECK(r.err.find("malformed integer") != std::string::npos);

  // Level orders must walk 1,2,...,L.
  spit(cfg, "orders = 2,3\nepochs = 1\n");
  r = run(base + cfg);
  CHECK(r.code == 1);
  CHECK(r.err.find("orders") != std::string::npos);
}
