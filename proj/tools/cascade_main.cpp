// cascade: command-line front end for synthetic task generation, cascade
// training/evaluation, filtering statistics, and grid ensemble benchmarks.
//
// Exit codes: 0 success, 1 runtime failure (bad data, numeric trouble, IO),
// 2 usage error.  Every command is deterministic given its flags, seed, and
// input files; wall-clock columns stay 0 unless --timings is passed so
// metrics files are byte-reproducible.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cascade/data_io.hpp"
#include "cascade/ensemble.hpp"
#include "cascade/errors.hpp"
#include "cascade/lattice.hpp"
#include "cascade/training.hpp"

namespace {

using namespace cascade;

std::string fmt(double x) {
  char b[64];
  std::snprintf(b, sizeof b, "%.10g", x);
  return b;
}

/// Output sink: a file path, or stdout when the path is "-".
class OutFile {
 public:
  explicit OutFile(const std::string& path) : path_(path) {
    if (path == "-") {
      out_ = &std::cout;
      return;
    }
    file_.open(path, std::ios::trunc);
    if (!file_) throw IoError("cannot open file for writing: " + path);
    out_ = &file_;
  }
  std::ostream& stream() { return *out_; }
  void finish() {
    out_->flush();
    if (file_.is_open() && !file_) throw IoError("error while writing file: " + path_);
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

// ---------------------------------------------------------------------------
// Flat key=value config files ('#' comments, blank lines ignored).

class ConfigMap {
 public:
  ConfigMap() = default;

  explicit ConfigMap(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::size_t first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      auto trim = [](std::string s) {
        const std::size_t a = s.find_first_not_of(" \t");
        if (a == std::string::npos) return std::string();
        const std::size_t b = s.find_last_not_of(" \t");
        return s.substr(a, b - a + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (!kv_.emplace(key, trim(line.substr(eq + 1))).second)
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " + key);
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  double num(const std::string& key, double fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return parse_num(it->second, key);
  }

  std::uint32_t u32(const std::string& key, std::uint32_t fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return parse_u32(it->second, key);
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
      throw ConfigError("config key " + key + ": malformed integer '" + it->second + "'");
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    throw ConfigError("config key " + key + ": expected 0/1/true/false");
  }

  std::vector<double> list(const std::string& key, std::vector<double> fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    return split_nums(it->second, key);
  }

  std::vector<std::uint32_t> ulist(const std::string& key,
                                   std::vector<std::uint32_t> fallback) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    used_.insert(key);
    std::vector<std::uint32_t> out;
    for (const std::string& piece : split(it->second)) out.push_back(parse_u32(piece, key));
    return out;
  }

  /// Call after reading every supported key: leftover keys are mistakes.
  void finish() const {
    for (const auto& [key, value] : kv_)
      if (!used_.count(key)) throw ConfigError("unknown config key: " + key);
  }

  static std::vector<double> split_nums(const std::string& text, const std::string& key) {
    std::vector<double> out;
    for (const std::string& piece : split(text)) out.push_back(parse_num(piece, key));
    return out;
  }

 private:
  static std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t comma = std::min(text.find(',', start), text.size());
      out.push_back(text.substr(start, comma - start));
      start = comma + 1;
    }
    return out;
  }
  static double parse_num(const std::string& text, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
      throw ConfigError("config key " + key + ": malformed number '" + text + "'");
    return v;
  }
  static std::uint32_t parse_u32(const std::string& text, const std::string& key) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || v > 0xffffffffUL)
      throw ConfigError("config key " + key + ": malformed integer '" + text + "'");
    return static_cast<std::uint32_t>(v);
  }

  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

TrainConfig base_train_config(ConfigMap& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.lambda = cfg.num("lambda", t.lambda);
  t.eta0 = cfg.num("eta0", t.eta0);
  t.epochs = cfg.u32("epochs", t.epochs);
  t.average = cfg.flag("average", t.average);
  t.margin_value = cfg.num("margin_value", t.margin_value);
  t.seed = seed;
  const std::string schedule = cfg.str("schedule", "pegasos");
  if (schedule == "pegasos")
    t.schedule = EtaSchedule::Pegasos;
  else if (schedule == "constant")
    t.schedule = EtaSchedule::Constant;
  else
    throw ConfigError("config key schedule: expected pegasos or constant");
  const std::string margin = cfg.str("margin", "length");
  if (margin == "length")
    t.margin_mode = MarginMode::ExampleLength;
  else if (margin == "constant")
    t.margin_mode = MarginMode::Constant;
  else
    throw ConfigError("config key margin: expected length or constant");
  return t;
}

// ---------------------------------------------------------------------------
// Metrics TSV

const char kMetricsHeader[] =
    "level\talpha\tfilter_loss\tefficiency_loss\tdensity\ttoken_accuracy\t"
    "sequence_accuracy\twall_ms\n";

void metrics_row(std::ostream& o, const std::string& level, double alpha, double lf,
                 double le, double density, double tok, double seq, std::uint64_t ms) {
  o << level << '\t' << fmt(alpha) << '\t' << fmt(lf) << '\t' << fmt(le) << '\t'
    << fmt(density) << '\t' << fmt(tok) << '\t' << fmt(seq) << '\t' << ms << '\n';
}

std::uint64_t elapsed_ms(std::chrono::steady_clock::time_point start, bool timings) {
  if (!timings) return 0;
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now() - start)
                                        .count());
}

// ---------------------------------------------------------------------------
// Subcommand options and runners

struct SynthOpts {
  std::string out;
  std::string dev_out, test_out;
  std::uint32_t count = 200, dev_count = 0, test_count = 0;
  std::uint32_t order = 2, labels = 4, len_min = 8, len_max = 16;
  double scale = 1.0, noise = 0.2;
  std::uint64_t seed = 1;
};

int run_synth(const SynthOpts& o) {
  if (!o.dev_out.empty() && o.dev_count == 0)
    throw ConfigError("--dev-out needs --dev-count > 0");
  if (!o.test_out.empty() && o.test_count == 0)
    throw ConfigError("--test-out needs --test-count > 0");

  SynthChainConfig cfg;
  cfg.order = o.order;
  cfg.num_labels = o.labels;
  cfg.len_min = o.len_min;
  cfg.len_max = o.len_max;
  cfg.count = o.count + (o.dev_out.empty() ? 0 : o.dev_count) +
              (o.test_out.empty() ? 0 : o.test_count);
  cfg.weight_scale = o.scale;
  cfg.emit_noise = o.noise;
  cfg.seed = o.seed;
  auto [data, gen] = synth_hmm(cfg);

  // All splits come from one generator; carve the sample sequentially.
  auto take = [&data](std::uint32_t from, std::uint32_t n) {
    SequenceDataset part;
    part.num_labels = data.num_labels;
    part.examples.assign(data.examples.begin() + from, data.examples.begin() + from + n);
    return part;
  };
  std::uint32_t at = 0;
  write_sequence_dataset(take(at, o.count), o.out);
  at += o.count;
  if (!o.dev_out.empty()) {
    write_sequence_dataset(take(at, o.dev_count), o.dev_out);
    at += o.dev_count;
  }
  if (!o.test_out.empty()) write_sequence_dataset(take(at, o.test_count), o.test_out);
  std::cerr << "wrote " << cfg.count << " examples (order " << o.order << ", K=" << o.labels
            << ")\n";
  return 0;
}

struct TrainOpts {
  std::string data, dev, config, out, metrics = "-";
  std::optional<std::uint64_t> seed;
  bool ensemble = false;
  bool timings = false;
};

int run_train_chain(const TrainOpts& o, ConfigMap& cfg) {
  const std::uint64_t seed = o.seed ? *o.seed : cfg.u64("seed", 1);
  CascadeConfig cc;
  cc.dimension = cfg.u32("dimension", cc.dimension);
  std::vector<std::uint32_t> orders = cfg.ulist("orders", {});
  if (orders.empty()) {
    const std::uint32_t levels = cfg.u32("levels", 1);
    for (std::uint32_t t = 0; t < levels; ++t) orders.push_back(t + 1);
  }
  for (std::size_t t = 0; t < orders.size(); ++t)
    if (orders[t] != t + 1)
      throw ConfigError("config key orders: must read 1,2,...,L (one order bump per level)");

  const TrainConfig base = base_train_config(cfg, seed);
  const std::vector<double> alphas =
      cfg.list("alpha_candidates", {0.0, 0.2, 0.4, 0.6, 0.8});
  const double tolerance = cfg.num("tolerance", 0.01);
  const bool subcliques = cfg.flag("filter_subcliques", false);
  for (std::size_t t = 0; t < orders.size(); ++t) {
    LevelConfig lc;
    lc.alpha_candidates = alphas;
    lc.tolerance = tolerance;
    lc.filter_subcliques = subcliques && orders[t] >= 2;
    lc.expansion = Expansion::IncreaseOrder;
    lc.train = base;
    cc.levels.push_back(std::move(lc));
  }
  cc.final_train = base;
  cc.final_train.schedule = EtaSchedule::Constant;
  cc.final_train.lambda = 0.0;
  cc.final_train.eta0 = cfg.num("final_eta0", 1.0);
  cc.final_train.epochs = cfg.u32("final_epochs", base.epochs);
  cfg.finish();

  const SequenceDataset train = read_sequence_dataset(o.data);
  const SequenceDataset dev = read_sequence_dataset(o.dev);

  const auto start = std::chrono::steady_clock::now();
  const TrainedCascade cascade = train_cascade(train, dev, cc);
  const std::uint64_t ms = elapsed_ms(start, o.timings);

  if (!o.out.empty()) save_checkpoint(cascade, o.out);

  OutFile sink(o.metrics);
  sink.stream() << kMetricsHeader;
  for (std::size_t t = 0; t < cascade.levels.size(); ++t) {
    const LevelReport& r = cascade.levels[t].report;
    metrics_row(sink.stream(), std::to_string(t + 1), r.alpha, r.dev_filter_loss,
                r.dev_efficiency_loss, r.dev_density, r.dev_token_accuracy,
                r.dev_sequence_accuracy, 0);
  }
  const CascadeEval ev = evaluate_cascade(cascade, dev);
  metrics_row(sink.stream(), "final", 0.0, 0.0, 0.0, ev.final_density, ev.token_accuracy,
              ev.sequence_accuracy, ms);
  sink.finish();
  return 0;
}

int run_train_grid(const TrainOpts& o, ConfigMap& cfg) {
  const std::uint64_t seed = o.seed ? *o.seed : cfg.u64("seed", 1);
  SynthGridConfig sg;
  sg.rows = cfg.u32("grid_rows", sg.rows);
  sg.cols = cfg.u32("grid_cols", sg.cols);
  sg.num_labels = cfg.u32("grid_labels", sg.num_labels);
  sg.coupling_scale = cfg.num("grid_coupling", sg.coupling_scale);
  sg.emit_noise = cfg.num("grid_noise", 0.2);
  sg.seed = seed;
  sg.count = cfg.u32("grid_train_count", 200);
  const std::uint32_t dev_count = cfg.u32("grid_dev_count", 100);

  GridCascadeConfig gc;
  gc.dimension = cfg.u32("dimension", gc.dimension);
  const TrainConfig base = base_train_config(cfg, seed);
  const std::vector<double> alphas =
      cfg.list("alpha_candidates", {0.0, 0.2, 0.4, 0.6, 0.8});
  const double tolerance = cfg.num("tolerance", 0.01);
  std::vector<std::uint32_t> label_levels = cfg.ulist("grid_label_levels", {sg.num_labels});
  if (label_levels.empty() || label_levels.back() != sg.num_labels)
    throw ConfigError("config key grid_label_levels: must end at grid_labels");
  for (std::size_t t = 0; t + 1 < label_levels.size(); ++t) {
    if (label_levels[t] == 0 || label_levels[t + 1] % label_levels[t] != 0 ||
        label_levels[t + 1] <= label_levels[t])
      throw ConfigError(
          "config key grid_label_levels: each level must divide the next evenly");
    gc.hierarchies.push_back(
        StateHierarchy::even_split(label_levels[t], label_levels[t + 1] / label_levels[t]));
  }
  for (std::size_t t = 0; t < label_levels.size(); ++t) {
    GridLevelConfig lc;
    lc.alpha_candidates = alphas;
    lc.tolerance = tolerance;
    lc.train = base;
    gc.levels.push_back(std::move(lc));
  }
  cfg.finish();

  const GridDataset train = synth_grid_labels(sg);
  SynthGridConfig sgd = sg;
  sgd.count = dev_count;
  sgd.seed = seed + 1;
  const GridDataset dev = synth_grid_labels(sgd);

  const auto start = std::chrono::steady_clock::now();
  const TrainedGridCascade cascade = grid_coarse_to_fine(train, dev, gc);
  const std::uint64_t ms = elapsed_ms(start, o.timings);
  if (!o.out.empty())
    std::cerr << "note: grid cascades are not checkpointed; ignoring --out\n";

  OutFile sink(o.metrics);
  sink.stream() << kMetricsHeader;
  for (std::size_t t = 0; t < cascade.levels.size(); ++t) {
    const GridLevelReport& r = cascade.levels[t].report;
    metrics_row(sink.stream(), std::to_string(t + 1), r.alpha, r.dev_filter_loss,
                r.dev_efficiency_loss, r.dev_density, 0.0, 0.0, 0);
  }
  // Final row: density of the surviving state lists and full-truth recall
  // (in the sequence_accuracy column; grids have no token predictor).
  const GridCascadeEval ev = evaluate_grid_cascade(cascade, dev);
  metrics_row(sink.stream(), "final", 0.0, 0.0, 0.0, ev.final_density, 0.0, ev.truth_recall,
              ms);
  sink.finish();
  return 0;
}

int run_train(const TrainOpts& o) {
  ConfigMap cfg = o.config.empty() ? ConfigMap() : ConfigMap(o.config);
  return o.ensemble ? run_train_grid(o, cfg) : run_train_chain(o, cfg);
}

struct EvalOpts {
  std::string model, data, metrics = "-", trace;
  bool timings = false;
};

int run_eval(const EvalOpts& o) {
  const TrainedCascade cascade = load_cascade(o.model);
  const SequenceDataset data = read_sequence_dataset(o.data);

  const auto start = std::chrono::steady_clock::now();
  const CascadeEval ev = evaluate_cascade(cascade, data);
  const std::uint64_t ms = elapsed_ms(start, o.timings);

  OutFile sink(o.metrics);
  sink.stream() << kMetricsHeader;
  for (std::size_t t = 0; t < cascade.levels.size(); ++t)
    metrics_row(sink.stream(), std::to_string(t + 1), cascade.levels[t].alpha,
                ev.level_filter_loss[t], ev.level_efficiency_loss[t], ev.level_density[t],
                0.0, 0.0, 0);
  metrics_row(sink.stream(), "final", 0.0, 0.0, 0.0, ev.final_density, ev.token_accuracy,
              ev.sequence_accuracy, ms);
  sink.finish();

  if (!o.trace.empty()) {
    OutFile tf(o.trace);
    tf.stream() << "example\tlevel\tposition\tsurvivors\ttau\tkept_all\n";
    std::vector<LevelTrace> trace;
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
      trace.clear();
      apply_cascade(cascade, data.examples[i].input, &trace);
      for (std::size_t t = 0; t < trace.size(); ++t)
        for (std::size_t pos = 0; pos < trace[t].survivors.size(); ++pos)
          tf.stream() << i << '\t' << t + 1 << '\t' << pos << '\t'
                      << trace[t].survivors[pos] << '\t' << fmt(trace[t].tau) << '\t'
                      << (trace[t].kept_all ? 1 : 0) << '\n';
    }
    tf.finish();
  }
  return 0;
}

struct FilterStatsOpts {
  std::string model, data, alphas = "0,0.2,0.4,0.6,0.8", out = "-";
};

int run_filter_stats(const FilterStatsOpts& o) {
  LinearModel model;
  if (peek_checkpoint(o.model) == CheckpointKind::Model)
    model = load_model(o.model);
  else
    model = load_cascade(o.model).final_model;

  const SequenceDataset data = read_sequence_dataset(o.data);
  const std::vector<TrainExample> examples =
      make_examples(data, model.num_labels(), model.order());
  const std::vector<double> alphas = ConfigMap::split_nums(o.alphas, "--alphas");

  OutFile sink(o.out);
  sink.stream() << "alpha\tfilter_loss\tefficiency_loss\n";
  for (double a : alphas) {
    const FilterStats stats = measure_meanmax(model, examples, a);
    sink.stream() << fmt(a) << '\t' << fmt(stats.mean_filter_loss) << '\t'
                  << fmt(stats.mean_efficiency_loss) << '\n';
  }
  sink.finish();
  return 0;
}

struct GridBenchOpts {
  std::uint32_t rows = 3, cols = 3, labels = 3, count = 20, samples = 100;
  std::uint64_t seed = 1;
  std::string out = "-";
};

int run_grid_bench(const GridBenchOpts& o) {
  const CombDecomposition combs = comb_decompose(o.rows, o.cols);
  const std::uint32_t nodes = combs.nodes();
  const std::uint32_t P = static_cast<std::uint32_t>(combs.combs.size());
  const GridStates states = full_grid_states(nodes, o.labels);

  // err[k][r]: mean error of ranking r at top-(k+1); rankings are the
  // summed ensemble, the brute-force joint marginals, then aggregates of
  // the individual sub-models.
  std::vector<double> ens_err(o.labels, 0.0), joint_err(o.labels, 0.0);
  std::vector<double> sub_best(o.labels, 0.0), sub_mean(o.labels, 0.0),
      sub_worst(o.labels, 0.0);

  auto topk_keep = [&](const std::vector<double>& values, std::uint32_t k) {
    // Indices of the k largest values; ties keep the smaller state.
    std::vector<std::uint32_t> idx(values.size());
    for (std::uint32_t i = 0; i < values.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (values[a] != values[b]) return values[a] > values[b];
      return a < b;
    });
    idx.resize(k);
    std::vector<char> keep(values.size(), 0);
    for (std::uint32_t i : idx) keep[i] = 1;
    return keep;
  };
  auto error_rate = [&](const std::vector<std::vector<double>>& value, std::uint32_t k,
                        const std::vector<Output>& truths) {
    std::vector<std::vector<char>> keep(nodes);
    for (std::uint32_t v = 0; v < nodes; ++v) keep[v] = topk_keep(value[v], k);
    std::uint32_t filtered = 0;
    for (const Output& y : truths) {
      for (std::uint32_t v = 0; v < nodes; ++v)
        if (!keep[v][y[v]]) {
          ++filtered;
          break;
        }
    }
    return static_cast<double>(filtered) / static_cast<double>(truths.size());
  };

  for (std::uint32_t i = 0; i < o.count; ++i) {
    const GridInstance inst = synth_grid(o.rows, o.cols, o.labels, o.seed + i);
    const EnsembleTable et = ensemble_max_marginals(inst.model, combs, states);
    const JointTable jt = brute_force_joint_max_marginals(inst.model, combs, states);
    const std::vector<Output> truths =
        sample_grid_truths(inst.model, o.samples, o.seed + 1000003ull * (i + 1));

    for (std::uint32_t k = 1; k <= o.labels; ++k) {
      ens_err[k - 1] += error_rate(et.summed, k, truths);
      joint_err[k - 1] += error_rate(jt.value, k, truths);
      double best = 1.0, worst = 0.0, mean = 0.0;
      for (std::uint32_t p = 0; p < P; ++p) {
        const double e = error_rate(et.sub_values[p], k, truths);
        best = std::min(best, e);
        worst = std::max(worst, e);
        mean += e;
      }
      sub_best[k - 1] += best;
      sub_worst[k - 1] += worst;
      sub_mean[k - 1] += mean / P;
    }
  }

  OutFile sink(o.out);
  sink.stream() << "top_k,ensemble_err,joint_mm_err,sub_best_err,sub_mean_err,sub_worst_err\n";
  for (std::uint32_t k = 1; k <= o.labels && o.count > 0; ++k) {
    const double n = static_cast<double>(o.count);
    sink.stream() << k << ',' << fmt(ens_err[k - 1] / n) << ',' << fmt(joint_err[k - 1] / n)
                  << ',' << fmt(sub_best[k - 1] / n) << ',' << fmt(sub_mean[k - 1] / n)
                  << ',' << fmt(sub_worst[k - 1] / n) << '\n';
  }
  sink.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "structured prediction cascades: synthetic tasks, max-marginal filtering, "
      "training, and grid ensembles"};
  app.require_subcommand(1);

  SynthOpts synth;
  CLI::App* s = app.add_subcommand("synth", "generate a synthetic chain dataset");
  s->add_option("--out", synth.out, "training split path")->required();
  s->add_option("--dev-out", synth.dev_out, "dev split path");
  s->add_option("--test-out", synth.test_out, "test split path");
  s->add_option("--count", synth.count, "training examples");
  s->add_option("--dev-count", synth.dev_count, "dev examples");
  s->add_option("--test-count", synth.test_count, "test examples");
  s->add_option("--order", synth.order, "generator memory (previous states)");
  s->add_option("--labels", synth.labels, "alphabet size");
  s->add_option("--len-min", synth.len_min, "minimum sequence length");
  s->add_option("--len-max", synth.len_max, "maximum sequence length");
  s->add_option("--scale", synth.scale, "generator logit scale");
  s->add_option("--noise", synth.noise, "token indicator noise in [0,1]");
  s->add_option("--seed", synth.seed, "generator seed");

  TrainOpts train;
  CLI::App* t = app.add_subcommand(
      "train",
      "train a filtering cascade; writes per-level metrics TSV (level, alpha, "
      "filter_loss, efficiency_loss, density, token_accuracy, sequence_accuracy, "
      "wall_ms) plus a 'final' row");
  t->add_option("--data", train.data, "training dataset path")->required();
  t->add_option("--dev", train.dev, "dev dataset path (required unless --ensemble)");
  t->add_option("--config", train.config,
                "flat key=value config (keys: levels/orders, alpha_candidates, tolerance, "
                "epochs, lambda, eta0, schedule, average, margin, margin_value, dimension, "
                "filter_subcliques, final_epochs, final_eta0, seed; grid_* keys with "
                "--ensemble)");
  t->add_option("--out", train.out, "checkpoint output path");
  t->add_option("--metrics", train.metrics, "metrics TSV path ('-' = stdout)");
  auto* seed_opt = t->add_option("--seed", "seed override");
  t->add_flag("--ensemble", train.ensemble,
              "grid-ensemble mode: train on a synthetic grid task described by grid_* "
              "config keys (--data/--dev ignored)");
  t->add_flag("--timings", train.timings, "fill wall_ms (off by default for reproducible bytes)");

  EvalOpts eval;
  CLI::App* e = app.add_subcommand("eval",
                                   "evaluate a cascade checkpoint on a labeled dataset");
  e->add_option("--model", eval.model, "cascade checkpoint path")->required();
  e->add_option("--data", eval.data, "dataset path")->required();
  e->add_option("--metrics", eval.metrics, "metrics TSV path ('-' = stdout)");
  e->add_option("--trace", eval.trace,
                "per-example TSV of surviving assignments per position per level");
  e->add_flag("--timings", eval.timings, "fill wall_ms");

  FilterStatsOpts fstats;
  CLI::App* f = app.add_subcommand(
      "filter-stats", "sweep filtering alphas for one model and report mean losses");
  f->add_option("--model", fstats.model,
                "checkpoint path (a cascade checkpoint uses its final model)")
      ->required();
  f->add_option("--data", fstats.data, "dataset path")->required();
  f->add_option("--alphas", fstats.alphas, "comma-separated alphas in [0,1)");
  f->add_option("--out", fstats.out, "output TSV path ('-' = stdout)");

  GridBenchOpts bench;
  CLI::App* g = app.add_subcommand(
      "grid-bench",
      "synthetic grid benchmark: top-K filtering error of the summed ensemble vs "
      "brute-force joint marginals vs individual sub-models (small grids only)");
  g->add_option("--rows", bench.rows, "grid rows");
  g->add_option("--cols", bench.cols, "grid cols");
  g->add_option("--labels", bench.labels, "alphabet size");
  g->add_option("--count", bench.count, "instances");
  g->add_option("--samples", bench.samples, "planted truths per instance");
  g->add_option("--seed", bench.seed, "seed");
  g->add_option("--out", bench.out, "output CSV path ('-' = stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed_opt->count()) train.seed = seed_opt->as<std::uint64_t>();
    if (app.got_subcommand(s)) return run_synth(synth);
    if (app.got_subcommand(t)) {
      if (!train.ensemble && train.dev.empty()) {
        std::cerr << "train: --dev is required unless --ensemble is set\n";
        return 2;
      }
      return run_train(train);
    }
    if (app.got_subcommand(e)) return run_eval(eval);
    if (app.got_subcommand(f)) return run_filter_stats(fstats);
    if (app.got_subcommand(g)) return run_grid_bench(bench);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
