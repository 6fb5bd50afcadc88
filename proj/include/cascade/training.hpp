// Training: stochastic subgradient filtering models, baselines, alpha
// tuning, and the forward batch cascade.
//
// A cascade is trained level by level.  At each level a filtering model is
// fit for every candidate alpha by minimizing the regularized hinge
//   lambda/2 ||theta||^2 + mean_i max{0, margin_i + tau(x_i) - score(y_i)},
// the filtering alpha is then tuned on the dev set (most pruning subject to
// a filtering-loss tolerance), every example's lattice is pruned with the
// winning pair, and the surviving space is expanded (higher Markov order) or
// refined (finer state alphabet) for the next level.  The last level's
// lattice feeds an averaged structured perceptron that does the actual
// prediction.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cascade/losses.hpp"
#include "cascade/model.hpp"
#include "cascade/threshold.hpp"

namespace cascade {

enum class EtaSchedule {
  Constant,  // eta_t = eta0
  Pegasos,   // eta_t = 1/(lambda t); requires lambda > 0
};

enum class MarginMode {
  ExampleLength,  // margin_i = length of example i
  Constant,       // margin_i = margin_value
};

struct TrainConfig {
  double lambda = 1e-4;
  EtaSchedule schedule = EtaSchedule::Pegasos;
  double eta0 = 0.5;  // step size under Constant
  std::uint32_t epochs = 3;
  std::uint64_t seed = 1;
  bool average = true;  // return the uniform average of post-step iterates
  MarginMode margin_mode = MarginMode::ExampleLength;
  double margin_value = 1.0;  // margin under Constant
};

/// ConfigError on invalid combinations (epochs 0, Pegasos with lambda 0, ...).
void validate(const TrainConfig& config);

/// One example as it moves through the cascade: the input, the truth mapped
/// to the current level's alphabet, and the current surviving lattice.
struct TrainExample {
  SequenceInput input;
  Output truth;
  SparseLattice lattice;
  bool margin_active = true;  // false once an earlier level pruned the truth
};

/// The margin demanded for one example under the config's margin mode.
double example_margin(const TrainConfig& config, const SequenceInput& input);

/// Step size at step t (1-based).
double step_size(const TrainConfig& config, std::uint64_t t);

/// One subgradient step on one example at step index t (1-based):
///   theta <- (1 - eta lambda) theta                     always
///   theta <- theta + eta f(x,y) - eta alpha f(x,y*)
///            - eta (1-alpha)/N sum_c,y_c f(x,witness(y_c))   if hinge > 0
/// where y* is the MAP output and N the survivor count.  Throws NumericError
/// when the threshold or truth score turns non-finite.
void sc_step(LinearModel& model, const TrainExample& example, double alpha,
             const TrainConfig& config, std::uint64_t t);

/// The instantaneous objective lambda/2 ||theta||^2 + mean hinge over the
/// margin-active examples (examples with pruned truth are skipped).
double sc_objective(const LinearModel& model, std::span<const TrainExample> examples,
                    double alpha, const TrainConfig& config);

/// Epochs of seeded shuffled sc_step passes starting from `init` (normally a
/// zero-weight prototype).  Margin-inactive examples are skipped.  Returns
/// the averaged model when config.average is set.
LinearModel train_level(const LinearModel& init, std::span<const TrainExample> examples,
                        double alpha, const TrainConfig& config);

/// Averaged structured perceptron over the examples' lattices: on a decode
/// mistake, theta += eta0 (f(x,y) - f(x,yhat)).  Trains on every example
/// (prediction needs no margin constraint).
LinearModel perceptron_train(const LinearModel& init,
                             std::span<const TrainExample> examples,
                             const TrainConfig& config);

/// Conditional log-likelihood SGD over the examples' lattices (the
/// sum-product baseline): theta <- (1-eta lambda) theta + eta (f(x,y) -
/// E_{P(y'|x)} f(x,y')).
LinearModel crf_train(const LinearModel& init, std::span<const TrainExample> examples,
                      const TrainConfig& config);

/// Result of tuning the filtering alpha on a dev set.
struct AlphaChoice {
  double alpha = 0.0;
  bool feasible = false;  // some alpha met the tolerance
  double mean_filter_loss = 0.0;
  double mean_efficiency_loss = 0.0;
};

/// Picks the alpha minimizing mean efficiency loss subject to mean filtering
/// loss <= epsilon, searching the candidate grid plus every per-example
/// critical alpha (where the truth score crosses the threshold).  Falls back
/// to alpha = 0 when nothing is feasible.  Ties prefer the larger alpha.
AlphaChoice tune_alpha(const LinearModel& model, std::span<const TrainExample> dev,
                       const std::vector<double>& candidates, double epsilon);

/// Mean filtering and efficiency loss of mean-max pruning at a fixed alpha.
struct FilterStats {
  double mean_filter_loss = 0.0;
  double mean_efficiency_loss = 0.0;
};
FilterStats measure_meanmax(const LinearModel& model, std::span<const TrainExample> examples,
                            double alpha);

/// Posterior-threshold baseline: an assignment survives when P(y_c|x) >
/// threshold.  Filtering loss counts examples where some truth clique was
/// pruned; efficiency loss is the surviving fraction.
FilterStats measure_posterior(const LinearModel& model,
                              std::span<const TrainExample> examples, double threshold);

/// Largest pruning threshold whose dev filtering loss stays within epsilon
/// (sweeps the per-example critical posteriors); 0 when nothing is feasible.
double tune_posterior_threshold(const LinearModel& model, std::span<const TrainExample> dev,
                                double epsilon);

enum class Expansion {
  IncreaseOrder,  // lift surviving d-grams to (d+1)-grams
  Refine,         // substitute states with their hierarchy children (order 1)
};

/// Configuration of one cascade level.
struct LevelConfig {
  std::vector<double> alpha_candidates{0.0, 0.2, 0.4, 0.6, 0.8};
  double tolerance = 0.01;  // dev filtering-loss budget for alpha tuning
  /// Filter order-(d-1) subcliques instead of the level's d-grams (the
  /// survivor space is then every d-gram whose subcliques all survived).
  bool filter_subcliques = false;
  Expansion expansion = Expansion::IncreaseOrder;  // applied after this level
  std::optional<StateHierarchy> hierarchy;         // required when Refine
  TrainConfig train;
};

struct CascadeConfig {
  std::uint32_t dimension = 1u << 15;  // feature hashing dimension
  std::vector<LevelConfig> levels;
  TrainConfig final_train;  // the final perceptron predictor
};

/// Per-level record of what training measured on the dev set.
struct LevelReport {
  double train_alpha = 0.0;  // alpha candidate the weights were trained with
  double alpha = 0.0;        // tuned filtering alpha
  bool feasible = false;
  double dev_filter_loss = 0.0;
  double dev_efficiency_loss = 0.0;
  double dev_density = 0.0;          // mean lattice density after filtering
  double dev_token_accuracy = 0.0;   // this level's model decoding the dev set
  double dev_sequence_accuracy = 0.0;
  std::uint32_t truth_pruned_train = 0;  // examples newly dropped from the margin set
  std::uint32_t truth_pruned_dev = 0;
  std::uint32_t degenerate_kept_all = 0;  // filtering degeneracies (train+dev)
};

/// One trained level: enough to replay its filtering on new inputs.
struct CascadeLevel {
  LinearModel model;
  double alpha = 0.0;
  bool filter_subcliques = false;
  Expansion expansion = Expansion::IncreaseOrder;
  std::optional<StateHierarchy> hierarchy;
  LevelReport report;
};

struct TrainedCascade {
  std::vector<CascadeLevel> levels;
  LinearModel final_model;
};

/// Forward batch training of the whole cascade.  Truth outputs pruned at an
/// earlier level are dropped from the margin set of later levels and
/// counted; filtering degeneracies keep the lattice whole and are counted.
TrainedCascade train_cascade(const SequenceDataset& train, const SequenceDataset& dev,
                             const CascadeConfig& config);

/// Per-level trace of one input's journey through the cascade.
struct LevelTrace {
  double tau = 0.0;
  bool kept_all = false;
  std::vector<std::uint32_t> survivors;  // per anchor, after filtering
  double density = 0.0;
};

/// Runs every level's filter on one input and returns the final lattice.
SparseLattice apply_cascade(const TrainedCascade& cascade, const SequenceInput& input,
                            std::vector<LevelTrace>* trace = nullptr);

/// Final-model MAP decode over the cascade-filtered lattice.
Output cascade_predict(const TrainedCascade& cascade, const SequenceInput& input);

/// Dataset-level evaluation: per-level filtering/efficiency losses measured
/// with each level's stored alpha, final lattice density, and the final
/// predictor's accuracy.
struct CascadeEval {
  std::vector<double> level_filter_loss;
  std::vector<double> level_efficiency_loss;
  std::vector<double> level_density;
  double final_density = 0.0;
  double token_accuracy = 0.0;
  double sequence_accuracy = 0.0;
  std::uint32_t degenerate_kept_all = 0;
};
CascadeEval evaluate_cascade(const TrainedCascade& cascade, const SequenceDataset& data);

/// Builds level-0 train examples from a dataset: full order-1 lattices over
/// the coarsest alphabet of the cascade (dataset labels when no level
/// refines).  Exposed for tests and baselines.
std::vector<TrainExample> make_examples(const SequenceDataset& data, std::uint32_t num_labels,
                                        std::uint32_t order);

}  // namespace cascade
