// Trainers, alpha tuning, and cascade orchestration (see training.hpp).

#include "cascade/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cascade/rng.hpp"
#include "chain_engine.hpp"

namespace cascade {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in [0,1), got " + std::to_string(alpha));
}

void check_finite_weights(const LinearModel& model, const char* stage) {
  for (double w : model.weights())
    if (!std::isfinite(w))
      throw NumericError(std::string("weights diverged (non-finite) during ") + stage +
                         "; lower the step size or raise lambda");
}

void scale_weights(LinearModel& model, double factor) {
  if (factor == 1.0) return;
  for (double& w : model.weights()) w *= factor;
}

void add_features(LinearModel& model, const FeatureVector& f, double weight) {
  auto& w = model.weights();
  for (std::size_t i = 0; i < f.index.size(); ++i) w[f.index[i]] += weight * f.value[i];
}

std::uint64_t total_count(const std::vector<std::vector<double>>& value) {
  std::uint64_t n = 0;
  for (const auto& v : value) n += v.size();
  return n;
}

// Survivor count of sorted-ascending marginals strictly above tau.
std::uint64_t survivors_above(const std::vector<double>& sorted, double tau) {
  return static_cast<std::uint64_t>(sorted.end() -
                                    std::upper_bound(sorted.begin(), sorted.end(), tau));
}

// Shared accumulator for the averaged iterate.
struct Averager {
  explicit Averager(std::size_t dim, bool enabled)
      : sum(enabled ? dim : 0, 0.0), on(enabled) {}
  void absorb(const LinearModel& model) {
    if (!on) return;
    const auto& w = model.weights();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w[i];
    ++steps;
  }
  void finish(LinearModel& model) const {
    if (!on || steps == 0) return;
    auto& w = model.weights();
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = sum[i] / static_cast<double>(steps);
  }
  std::vector<double> sum;
  std::uint64_t steps = 0;
  bool on = false;
};

}  // namespace

void validate(const TrainConfig& config) {
  if (config.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (config.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (config.schedule == EtaSchedule::Pegasos && !(config.lambda > 0.0))
    throw ConfigError("the 1/(lambda t) schedule requires lambda > 0");
  if (config.schedule == EtaSchedule::Constant && !(config.eta0 > 0.0))
    throw ConfigError("constant step size must be positive");
  if (config.margin_mode == MarginMode::Constant && !(config.margin_value > 0.0))
    throw ConfigError("constant margin must be positive");
}

double example_margin(const TrainConfig& config, const SequenceInput& input) {
  return config.margin_mode == MarginMode::ExampleLength
             ? static_cast<double>(input.length())
             : config.margin_value;
}

double step_size(const TrainConfig& config, std::uint64_t t) {
  return config.schedule == EtaSchedule::Pegasos
             ? 1.0 / (config.lambda * static_cast<double>(t))
             : config.eta0;
}

void sc_step(LinearModel& model, const TrainExample& example, double alpha,
             const TrainConfig& config, std::uint64_t t) {
  check_alpha(alpha);
  detail::ChainEngine engine(model, example.input, example.lattice);
  std::vector<std::vector<double>> mm;
  const double gmax = engine.max_marginal_values(mm);
  const double tau = mean_max_tau(gmax, mean_marginal(mm), alpha);
  const double score = score_output(model, example.input, example.truth);
  if (!std::isfinite(tau) || !std::isfinite(score))
    throw NumericError("non-finite threshold/score at step " + std::to_string(t) +
                       " (tau=" + std::to_string(tau) + ", score=" + std::to_string(score) +
                       "); weights likely diverged");
  const double hinge = std::max(0.0, example_margin(config, example.input) + tau - score);
  const double eta = step_size(config, t);

  scale_weights(model, 1.0 - eta * config.lambda);
  if (hinge > 0.0) {
    add_features(model, featurize_output(model, example.input, example.truth), eta);
    if (alpha > 0.0) {
      Output ystar = engine.decode().first;
      add_features(model, featurize_output(model, example.input, ystar), -eta * alpha);
    }
    std::vector<std::uint32_t> touched;
    engine.add_witness_features(-eta * (1.0 - alpha) / static_cast<double>(total_count(mm)),
                                model.weights(), touched);
  }
}

double sc_objective(const LinearModel& model, std::span<const TrainExample> examples,
                    double alpha, const TrainConfig& config) {
  check_alpha(alpha);
  double reg = 0.0;
  for (double w : model.weights()) reg += w * w;
  reg *= 0.5 * config.lambda;

  double hinge_sum = 0.0;
  std::uint64_t n = 0;
  std::vector<std::vector<double>> mm;
  for (const TrainExample& ex : examples) {
    if (!ex.margin_active) continue;
    detail::ChainEngine engine(model, ex.input, ex.lattice);
    const double gmax = engine.max_marginal_values(mm);
    const double tau = mean_max_tau(gmax, mean_marginal(mm), alpha);
    const double score = score_output(model, ex.input, ex.truth);
    hinge_sum += std::max(0.0, example_margin(config, ex.input) + tau - score);
    ++n;
  }
  return reg + (n ? hinge_sum / static_cast<double>(n) : 0.0);
}

LinearModel train_level(const LinearModel& init, std::span<const TrainExample> examples,
                        double alpha, const TrainConfig& config) {
  validate(config);
  check_alpha(alpha);
  LinearModel model = init;

  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < examples.size(); ++i)
    if (examples[i].margin_active) order.push_back(i);
  if (order.empty()) return model;

  Averager avg(model.dimension(), config.average);
  Rng rng(config.seed);
  std::uint64_t t = 0;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::uint32_t i : order) {
      sc_step(model, examples[i], alpha, config, ++t);
      avg.absorb(model);
    }
    check_finite_weights(model, "subgradient training");
  }
  avg.finish(model);
  return model;
}

LinearModel perceptron_train(const LinearModel& init,
                             std::span<const TrainExample> examples,
                             const TrainConfig& config) {
  if (config.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(config.eta0 > 0.0)) throw ConfigError("perceptron step size must be positive");
  LinearModel model = init;
  if (examples.empty()) return model;

  std::vector<std::uint32_t> order(examples.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  Averager avg(model.dimension(), config.average);
  Rng rng(config.seed);
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::uint32_t i : order) {
      const TrainExample& ex = examples[i];
      Output decoded = map_decode(model, ex.input, ex.lattice).first;
      if (decoded != ex.truth) {
        add_features(model, featurize_output(model, ex.input, ex.truth), config.eta0);
        add_features(model, featurize_output(model, ex.input, decoded), -config.eta0);
      }
      avg.absorb(model);
    }
    check_finite_weights(model, "perceptron training");
  }
  avg.finish(model);
  return model;
}

LinearModel crf_train(const LinearModel& init, std::span<const TrainExample> examples,
                      const TrainConfig& config) {
  validate(config);
  LinearModel model = init;
  if (examples.empty()) return model;

  std::vector<std::uint32_t> order(examples.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  Averager avg(model.dimension(), config.average);
  Rng rng(config.seed);
  std::uint64_t t = 0;
  std::vector<std::uint32_t> touched;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::uint32_t i : order) {
      const TrainExample& ex = examples[i];
      detail::ChainEngine engine(model, ex.input, ex.lattice);
      SumProductResult sp = engine.sum_product();
      const double eta = step_size(config, ++t);
      scale_weights(model, 1.0 - eta * config.lambda);
      add_features(model, featurize_output(model, ex.input, ex.truth), eta);
      engine.add_expected_features(sp, -eta, model.weights(), touched);
      touched.clear();
      avg.absorb(model);
    }
    check_finite_weights(model, "log-likelihood training");
  }
  avg.finish(model);
  return model;
}

namespace {

// Per-example summary reused across candidate alphas during tuning.
struct DevStats {
  bool contained = false;
  double score = 0.0;
  double max = kNegInf;
  double mean = 0.0;
  std::vector<double> sorted;  // marginals ascending

  double filter_loss(double alpha) const {
    if (!contained) return 1.0;
    return score <= mean_max_tau(max, mean, alpha) ? 1.0 : 0.0;
  }
  double efficiency_loss(double alpha) const {
    double tau = mean_max_tau(max, mean, alpha);
    return static_cast<double>(survivors_above(sorted, tau)) /
           static_cast<double>(sorted.size());
  }
};

std::vector<DevStats> collect_dev_stats(const LinearModel& model,
                                        std::span<const TrainExample> dev) {
  std::vector<DevStats> stats;
  stats.reserve(dev.size());
  std::vector<std::vector<double>> mm;
  for (const TrainExample& ex : dev) {
    detail::ChainEngine engine(model, ex.input, ex.lattice);
    DevStats s;
    s.max = engine.max_marginal_values(mm);
    s.mean = mean_marginal(mm);
    s.contained = ex.margin_active && ex.lattice.contains(ex.truth);
    if (s.contained) s.score = score_output(model, ex.input, ex.truth);
    for (const auto& anchor : mm) s.sorted.insert(s.sorted.end(), anchor.begin(), anchor.end());
    std::sort(s.sorted.begin(), s.sorted.end());
    stats.push_back(std::move(s));
  }
  return stats;
}

}  // namespace

AlphaChoice tune_alpha(const LinearModel& model, std::span<const TrainExample> dev,
                       const std::vector<double>& candidates, double epsilon) {
  if (dev.empty()) throw ConfigError("alpha tuning needs a nonempty dev set");
  if (candidates.empty()) throw ConfigError("alpha tuning needs candidates");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw ConfigError("tolerance must lie in [0,1]");

  std::vector<DevStats> stats = collect_dev_stats(model, dev);

  // Candidate grid plus both sides of every example's critical alpha (where
  // its truth score meets the threshold); evaluation below is exact, so the
  // sweep only has to include the loss function's breakpoints.
  std::vector<double> grid(candidates);
  for (double a : grid) check_alpha(a);
  grid.push_back(0.0);
  for (const DevStats& s : stats) {
    if (!s.contained || !(s.max > s.mean)) continue;
    double critical = (s.score - s.mean) / (s.max - s.mean);
    if (critical > 0.0 && critical < 1.0) {
      grid.push_back(critical);
      double below = critical - 1e-9;
      if (below > 0.0) grid.push_back(below);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const double n = static_cast<double>(stats.size());
  AlphaChoice best;
  bool have_best = false;
  for (double a : grid) {
    double lf = 0.0, le = 0.0;
    for (const DevStats& s : stats) {
      lf += s.filter_loss(a);
      le += s.efficiency_loss(a);
    }
    lf /= n;
    le /= n;
    if (lf > epsilon) continue;
    // Scanning ascending: <= lets equal-efficiency ties fall to the larger
    // alpha (prune at least as hard for the same measured cost).
    if (!have_best || le <= best.mean_efficiency_loss) {
      best = {a, true, lf, le};
      have_best = true;
    }
  }
  if (have_best) return best;

  double lf = 0.0, le = 0.0;
  for (const DevStats& s : stats) {
    lf += s.filter_loss(0.0);
    le += s.efficiency_loss(0.0);
  }
  return {0.0, false, lf / n, le / n};
}

FilterStats measure_meanmax(const LinearModel& model, std::span<const TrainExample> examples,
                            double alpha) {
  check_alpha(alpha);
  if (examples.empty()) throw ConfigError("no examples to measure");
  std::vector<DevStats> stats = collect_dev_stats(model, examples);
  FilterStats out;
  for (const DevStats& s : stats) {
    out.mean_filter_loss += s.filter_loss(alpha);
    out.mean_efficiency_loss += s.efficiency_loss(alpha);
  }
  out.mean_filter_loss /= static_cast<double>(stats.size());
  out.mean_efficiency_loss /= static_cast<double>(stats.size());
  return out;
}

namespace {

// Minimum posterior over the truth's clique assignments, or -1 when the
// truth is not fully contained in the lattice (always counted as pruned).
double truth_min_posterior(const LogMarginalTable& post, const SparseLattice& lat,
                           const Output& truth) {
  if (!lat.contains(truth)) return -1.0;
  double pmin = 2.0;
  const std::uint32_t d = lat.order();
  for (std::uint32_t a = 0; a < lat.anchors(); ++a) {
    std::span<const State> gram(truth.data() + a, d);
    std::uint32_t idx = lat.find(a, gram);
    pmin = std::min(pmin, post.posterior[a][idx]);
  }
  return pmin;
}

}  // namespace

FilterStats measure_posterior(const LinearModel& model,
                              std::span<const TrainExample> examples, double threshold) {
  if (examples.empty()) throw ConfigError("no examples to measure");
  FilterStats out;
  for (const TrainExample& ex : examples) {
    LogMarginalTable post = sum_product_marginals(model, ex.input, ex.lattice);
    double pmin = truth_min_posterior(post, ex.lattice, ex.truth);
    out.mean_filter_loss += pmin <= threshold ? 1.0 : 0.0;
    std::uint64_t kept = 0, total = 0;
    for (const auto& anchor : post.posterior) {
      for (double p : anchor) kept += p > threshold ? 1 : 0;
      total += anchor.size();
    }
    out.mean_efficiency_loss += static_cast<double>(kept) / static_cast<double>(total);
  }
  out.mean_filter_loss /= static_cast<double>(examples.size());
  out.mean_efficiency_loss /= static_cast<double>(examples.size());
  return out;
}

double tune_posterior_threshold(const LinearModel& model, std::span<const TrainExample> dev,
                                double epsilon) {
  if (dev.empty()) throw ConfigError("threshold tuning needs a nonempty dev set");
  std::vector<double> pmins;
  pmins.reserve(dev.size());
  for (const TrainExample& ex : dev) {
    LogMarginalTable post = sum_product_marginals(model, ex.input, ex.lattice);
    pmins.push_back(truth_min_posterior(post, ex.lattice, ex.truth));
  }
  // Filtering loss only changes at the truth posteriors; the best feasible
  // threshold is just below one of them (or 0).
  std::vector<double> grid{0.0};
  for (double p : pmins) {
    if (p > 0.0) {
      grid.push_back(p);
      double below = p - 1e-12;
      if (below > 0.0) grid.push_back(below);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double best = 0.0;
  const double n = static_cast<double>(pmins.size());
  for (double thr : grid) {
    double lf = 0.0;
    for (double p : pmins) lf += p <= thr ? 1.0 : 0.0;
    if (lf / n <= epsilon) best = std::max(best, thr);
  }
  return best;
}

std::vector<TrainExample> make_examples(const SequenceDataset& data, std::uint32_t num_labels,
                                        std::uint32_t order) {
  std::vector<TrainExample> out;
  out.reserve(data.examples.size());
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const SequenceExample& ex = data.examples[i];
    for (State s : ex.truth)
      if (s >= num_labels)
        throw DataError("example " + std::to_string(i) + ": label " + std::to_string(s) +
                        " outside alphabet of size " + std::to_string(num_labels));
    out.push_back({ex.input, ex.truth,
                   SparseLattice::full(ex.input.length(), num_labels, order), true});
  }
  return out;
}

namespace {

// Resolved per-level shape of a cascade: Markov order, alphabet size, and
// the map from dataset labels to the level's alphabet.
struct LevelShape {
  std::uint32_t order = 1;
  std::uint32_t num_labels = 0;
  std::vector<State> relabel;  // dataset label -> level label
};

std::vector<LevelShape> resolve_levels(const CascadeConfig& config,
                                       std::uint32_t data_labels) {
  if (config.levels.empty()) throw ConfigError("cascade needs at least one level");
  if (config.dimension == 0) throw ConfigError("feature dimension must be >= 1");
  const std::size_t T = config.levels.size();

  std::vector<LevelShape> shape(T);
  shape[0].order = 1;
  for (std::size_t t = 0; t < T; ++t) {
    const LevelConfig& lc = config.levels[t];
    validate(lc.train);
    if (lc.alpha_candidates.empty())
      throw ConfigError("level " + std::to_string(t) + ": empty alpha candidate set");
    for (double a : lc.alpha_candidates) check_alpha(a);
    if (!(lc.tolerance >= 0.0 && lc.tolerance <= 1.0))
      throw ConfigError("level " + std::to_string(t) + ": tolerance must lie in [0,1]");
    if (lc.expansion == Expansion::Refine) {
      if (!lc.hierarchy)
        throw ConfigError("level " + std::to_string(t) + ": refine expansion needs a hierarchy");
      lc.hierarchy->validate();
      if (shape[t].order != 1)
        throw ConfigError("level " + std::to_string(t) +
                          ": refinement applies to order-1 levels only");
    }
    if (lc.filter_subcliques && shape[t].order < 2)
      throw ConfigError("level " + std::to_string(t) +
                        ": subclique filtering requires level order >= 2");
    if (t + 1 < T)
      shape[t + 1].order =
          shape[t].order + (lc.expansion == Expansion::IncreaseOrder ? 1 : 0);
  }

  // Alphabets walk backward from the dataset's labels through the refinement
  // hierarchies (the last level's expansion never fires).
  shape[T - 1].num_labels = data_labels;
  shape[T - 1].relabel.resize(data_labels);
  for (std::uint32_t s = 0; s < data_labels; ++s)
    shape[T - 1].relabel[s] = static_cast<State>(s);
  for (std::size_t t = T - 1; t-- > 0;) {
    const LevelConfig& lc = config.levels[t];
    if (lc.expansion == Expansion::Refine) {
      if (lc.hierarchy->fine_labels != shape[t + 1].num_labels)
        throw ConfigError("level " + std::to_string(t) +
                          ": hierarchy fine alphabet does not match the next level");
      shape[t].num_labels = lc.hierarchy->coarse_labels;
      shape[t].relabel.resize(data_labels);
      for (std::uint32_t s = 0; s < data_labels; ++s)
        shape[t].relabel[s] = lc.hierarchy->parent(shape[t + 1].relabel[s]);
    } else {
      shape[t].num_labels = shape[t + 1].num_labels;
      shape[t].relabel = shape[t + 1].relabel;
    }
  }
  return shape;
}

Output apply_relabel(const std::vector<State>& map, const Output& truth) {
  Output out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = map[truth[i]];
  return out;
}

// Filters `lattice` in place with (model, alpha); returns (tau, kept_all).
// Subclique mode projects to (d-1)-grams, filters those, and re-expands so
// the survivors are the d-grams whose subcliques all survived.  A degenerate
// all-equal table keeps the lattice untouched.
std::pair<double, bool> filter_in_place(SparseLattice& lattice, const LinearModel& model,
                                        const SequenceInput& input, double alpha,
                                        bool subcliques) {
  MaxMarginalTable table = max_marginals(model, input, lattice);
  if (subcliques) {
    auto [sub_lattice, sub_table] = project_to_subcliques(lattice, table);
    FilterOutcome outcome = meanmax_filter(sub_lattice, sub_table, alpha);
    if (!outcome.kept_all) lattice = expand(outcome.lattice);
    return {outcome.tau, outcome.kept_all};
  }
  FilterOutcome outcome = meanmax_filter(lattice, table, alpha);
  if (!outcome.kept_all) lattice = std::move(outcome.lattice);
  return {outcome.tau, outcome.kept_all};
}

}  // namespace

TrainedCascade train_cascade(const SequenceDataset& train, const SequenceDataset& dev,
                             const CascadeConfig& config) {
  const std::vector<LevelShape> shape = resolve_levels(config, train.num_labels);
  if (dev.num_labels != train.num_labels)
    throw DataError("train and dev label alphabets differ");
  const std::size_t T = config.levels.size();

  auto build = [&](const SequenceDataset& data) {
    std::vector<TrainExample> out = make_examples(data, data.num_labels, 1);
    for (TrainExample& ex : out) {
      if (ex.input.length() < shape[T - 1].order)
        throw ConfigError("an example is shorter than the final cascade order");
      ex.truth = apply_relabel(shape[0].relabel, ex.truth);
      ex.lattice = SparseLattice::full(ex.input.length(), shape[0].num_labels, 1);
    }
    return out;
  };
  std::vector<TrainExample> train_ex = build(train);
  std::vector<TrainExample> dev_ex = build(dev);

  TrainedCascade cascade;
  cascade.levels.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const LevelConfig& lc = config.levels[t];
    LinearModel proto =
        LinearModel::chain(config.dimension, shape[t].num_labels, shape[t].order);

    // Train one model per candidate alpha, tune each on dev, keep the best
    // feasible pair (fall back to the least-damaging one).
    LinearModel best_model;
    AlphaChoice best_choice;
    double best_train_alpha = 0.0;
    bool have = false;
    for (double a : lc.alpha_candidates) {
      LinearModel m = train_level(proto, train_ex, a, lc.train);
      AlphaChoice c = tune_alpha(m, dev_ex, lc.alpha_candidates, lc.tolerance);
      bool better;
      if (!have) {
        better = true;
      } else if (c.feasible != best_choice.feasible) {
        better = c.feasible;
      } else if (c.feasible) {
        better = c.mean_efficiency_loss < best_choice.mean_efficiency_loss ||
                 (c.mean_efficiency_loss == best_choice.mean_efficiency_loss &&
                  c.alpha > best_choice.alpha);
      } else {
        better = c.mean_filter_loss < best_choice.mean_filter_loss ||
                 (c.mean_filter_loss == best_choice.mean_filter_loss &&
                  c.mean_efficiency_loss < best_choice.mean_efficiency_loss);
      }
      if (better) {
        best_model = std::move(m);
        best_choice = c;
        best_train_alpha = a;
        have = true;
      }
    }

    LevelReport report;
    report.train_alpha = best_train_alpha;
    report.alpha = best_choice.alpha;
    report.feasible = best_choice.feasible;
    report.dev_filter_loss = best_choice.mean_filter_loss;
    report.dev_efficiency_loss = best_choice.mean_efficiency_loss;

    // This level's own decoding quality on dev, before pruning.
    std::uint64_t token_hits = 0, tokens = 0, seq_hits = 0;
    for (const TrainExample& ex : dev_ex) {
      Output decoded = map_decode(best_model, ex.input, ex.lattice).first;
      for (std::size_t i = 0; i < decoded.size(); ++i)
        token_hits += decoded[i] == ex.truth[i] ? 1 : 0;
      tokens += decoded.size();
      seq_hits += decoded == ex.truth ? 1 : 0;
    }
    report.dev_token_accuracy = tokens ? static_cast<double>(token_hits) / tokens : 0.0;
    report.dev_sequence_accuracy =
        dev_ex.empty() ? 0.0 : static_cast<double>(seq_hits) / dev_ex.size();

    // Prune everything with the winning pair.
    for (TrainExample& ex : train_ex) {
      auto [tau, kept_all] = filter_in_place(ex.lattice, best_model, ex.input,
                                             best_choice.alpha, lc.filter_subcliques);
      (void)tau;
      report.degenerate_kept_all += kept_all ? 1 : 0;
      if (ex.margin_active && !ex.lattice.contains(ex.truth)) {
        ex.margin_active = false;
        ++report.truth_pruned_train;
      }
    }
    double density_sum = 0.0;
    for (TrainExample& ex : dev_ex) {
      auto [tau, kept_all] = filter_in_place(ex.lattice, best_model, ex.input,
                                             best_choice.alpha, lc.filter_subcliques);
      (void)tau;
      report.degenerate_kept_all += kept_all ? 1 : 0;
      density_sum += ex.lattice.density();
      if (ex.margin_active && !ex.lattice.contains(ex.truth)) {
        ex.margin_active = false;
        ++report.truth_pruned_dev;
      }
    }
    report.dev_density = dev_ex.empty() ? 0.0 : density_sum / dev_ex.size();

    cascade.levels.push_back({std::move(best_model), best_choice.alpha, lc.filter_subcliques,
                              lc.expansion, lc.hierarchy, report});

    if (t + 1 < T) {
      auto advance = [&](std::vector<TrainExample>& exs, const SequenceDataset& data) {
        for (std::size_t i = 0; i < exs.size(); ++i) {
          if (lc.expansion == Expansion::IncreaseOrder) {
            exs[i].lattice = expand(exs[i].lattice);
          } else {
            exs[i].lattice = refine(exs[i].lattice, *lc.hierarchy);
            exs[i].truth = apply_relabel(shape[t + 1].relabel, data.examples[i].truth);
          }
        }
      };
      advance(train_ex, train);
      advance(dev_ex, dev);
    }
  }

  LinearModel final_proto =
      LinearModel::chain(config.dimension, shape[T - 1].num_labels, shape[T - 1].order);
  cascade.final_model = perceptron_train(final_proto, train_ex, config.final_train);
  return cascade;
}

SparseLattice apply_cascade(const TrainedCascade& cascade, const SequenceInput& input,
                            std::vector<LevelTrace>* trace) {
  if (cascade.levels.empty()) throw ConfigError("cascade has no levels");
  SparseLattice lattice =
      SparseLattice::full(input.length(), cascade.levels[0].model.num_labels(), 1);
  for (std::size_t t = 0; t < cascade.levels.size(); ++t) {
    const CascadeLevel& level = cascade.levels[t];
    auto [tau, kept_all] =
        filter_in_place(lattice, level.model, input, level.alpha, level.filter_subcliques);
    if (trace) {
      LevelTrace lt;
      lt.tau = tau;
      lt.kept_all = kept_all;
      lt.survivors.resize(lattice.anchors());
      for (std::uint32_t a = 0; a < lattice.anchors(); ++a) lt.survivors[a] = lattice.count(a);
      lt.density = lattice.density();
      trace->push_back(std::move(lt));
    }
    if (t + 1 < cascade.levels.size()) {
      lattice = level.expansion == Expansion::IncreaseOrder
                    ? expand(lattice)
                    : refine(lattice, *level.hierarchy);
    }
  }
  return lattice;
}

Output cascade_predict(const TrainedCascade& cascade, const SequenceInput& input) {
  SparseLattice lattice = apply_cascade(cascade, input);
  return map_decode(cascade.final_model, input, lattice).first;
}

CascadeEval evaluate_cascade(const TrainedCascade& cascade, const SequenceDataset& data) {
  if (cascade.levels.empty()) throw ConfigError("cascade has no levels");
  const std::size_t T = cascade.levels.size();
  const std::uint32_t fine_labels = cascade.levels[T - 1].model.num_labels();
  if (data.num_labels != fine_labels)
    throw DataError("dataset alphabet does not match the cascade's final alphabet");

  // Dataset label -> level alphabet, walking hierarchies backward.
  std::vector<std::vector<State>> relabel(T);
  relabel[T - 1].resize(fine_labels);
  for (std::uint32_t s = 0; s < fine_labels; ++s) relabel[T - 1][s] = static_cast<State>(s);
  for (std::size_t t = T - 1; t-- > 0;) {
    if (cascade.levels[t].expansion == Expansion::Refine) {
      const StateHierarchy& h = *cascade.levels[t].hierarchy;
      relabel[t].resize(fine_labels);
      for (std::uint32_t s = 0; s < fine_labels; ++s)
        relabel[t][s] = h.parent(relabel[t + 1][s]);
    } else {
      relabel[t] = relabel[t + 1];
    }
  }

  CascadeEval eval;
  eval.level_filter_loss.assign(T, 0.0);
  eval.level_efficiency_loss.assign(T, 0.0);
  eval.level_density.assign(T, 0.0);
  std::uint64_t token_hits = 0, tokens = 0, seq_hits = 0;

  for (const SequenceExample& ex : data.examples) {
    SparseLattice lattice =
        SparseLattice::full(ex.input.length(), cascade.levels[0].model.num_labels(), 1);
    for (std::size_t t = 0; t < T; ++t) {
      const CascadeLevel& level = cascade.levels[t];
      Output truth_t = apply_relabel(relabel[t], ex.truth);
      const double score = score_output(level.model, ex.input, truth_t);
      const bool contained = lattice.contains(truth_t);

      MaxMarginalTable table = max_marginals(level.model, ex.input, lattice);
      double tau;
      if (level.filter_subcliques) {
        auto [sub_lattice, sub_table] = project_to_subcliques(lattice, table);
        FilterOutcome o = meanmax_filter(sub_lattice, sub_table, level.alpha);
        tau = o.tau;
        eval.level_efficiency_loss[t] += efficiency_loss(sub_table, tau);
        eval.degenerate_kept_all += o.kept_all ? 1 : 0;
        if (!o.kept_all) lattice = expand(o.lattice);
      } else {
        FilterOutcome o = meanmax_filter(lattice, table, level.alpha);
        tau = o.tau;
        eval.level_efficiency_loss[t] += efficiency_loss(table, tau);
        eval.degenerate_kept_all += o.kept_all ? 1 : 0;
        if (!o.kept_all) lattice = std::move(o.lattice);
      }
      eval.level_filter_loss[t] += (contained && score > tau) ? 0.0 : 1.0;
      eval.level_density[t] += lattice.density();

      if (t + 1 < T) {
        lattice = level.expansion == Expansion::IncreaseOrder
                      ? expand(lattice)
                      : refine(lattice, *level.hierarchy);
      }
    }
    eval.final_density += lattice.density();

    Output decoded = map_decode(cascade.final_model, ex.input, lattice).first;
    for (std::size_t i = 0; i < decoded.size(); ++i)
      token_hits += decoded[i] == ex.truth[i] ? 1 : 0;
    tokens += decoded.size();
    seq_hits += decoded == ex.truth ? 1 : 0;
  }

  const double n = static_cast<double>(data.examples.size());
  if (!data.examples.empty()) {
    for (std::size_t t = 0; t < T; ++t) {
      eval.level_filter_loss[t] /= n;
      eval.level_efficiency_loss[t] /= n;
      eval.level_density[t] /= n;
    }
    eval.final_density /= n;
    eval.token_accuracy = static_cast<double>(token_hits) / static_cast<double>(tokens);
    eval.sequence_accuracy = static_cast<double>(seq_hits) / n;
  }
  return eval;
}

}  // namespace cascade
