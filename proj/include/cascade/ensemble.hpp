// Ensembles of tree sub-models over loopy 4-neighbor grid MRFs.
//
// A grid factorizes into "comb" spanning trees: for each column j, one comb
// made of every horizontal edge plus column j's vertical edges, and
// symmetrically one comb per row.  Every edge is covered at least once, and
// dividing each potential by the number of combs containing it makes the
// sub-model scores sum back to the full grid score exactly.  Max-marginals
// are computed per comb by tree message passing and summed across combs,
// which upper-bounds the intractable joint max-marginal; filtering compares
// the summed marginals against the sum of the per-comb thresholds, which
// preserves every output whose summed score clears that joint threshold.
//
// As in chain inference, messages only pick argmaxes: every reported
// marginal is the canonical re-fold of its witness output, so sums and
// comparisons against enumeration oracles are bit-reproducible.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/lattice.hpp"
#include "cascade/model.hpp"
#include "cascade/threshold.hpp"
#include "cascade/training.hpp"

namespace cascade {

/// One undirected grid edge between node ids a < b (row-major node ids).
/// Orientation 0 joins horizontal neighbors, 1 vertical.
struct GridEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t orientation = 0;
};

/// The canonical edge list of a rows x cols grid: nodes in row-major order,
/// each contributing its right edge then its down edge when they exist.
std::vector<GridEdge> grid_edges(std::uint32_t rows, std::uint32_t cols);

/// One tree sub-model: the subset of canonical edge ids it covers (always
/// ascending, always forming a spanning tree of the grid).
struct SubModel {
  std::vector<std::uint32_t> edges;
};

/// A grid's comb decomposition: the sub-models plus per-potential coverage
/// counts (how many sub-models contain each edge; every sub-model spans all
/// nodes, so node coverage is the sub-model count).
struct CombDecomposition {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<GridEdge> edge_list;           // canonical, = grid_edges(rows, cols)
  std::vector<SubModel> combs;               // column spines first, then row spines
  std::vector<std::uint32_t> edge_coverage;  // per canonical edge
  std::uint32_t node_coverage = 0;           // = combs.size()

  std::uint32_t nodes() const { return rows * cols; }
};

/// Builds the comb decomposition: cols column-spine combs plus rows
/// row-spine combs (2n for an n x n grid), every edge covered.  A grid with
/// a single row or column is already a tree and yields one sub-model
/// containing every edge.  Throws ShapeError on zero-sized grids.
CombDecomposition comb_decompose(std::uint32_t rows, std::uint32_t cols);

/// A grid MRF with explicit potential tables (the synthetic-experiment
/// setting; learned ensembles use GridEnsembleModel below instead).
struct GridModel {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t num_labels = 0;
  std::vector<std::vector<double>> unary;     // [node][state]
  std::vector<std::vector<double>> pairwise;  // [canonical edge][a_state*K + b_state]
};

/// Full joint score of an output: unary terms in node order, then pairwise
/// terms in canonical edge order.  The summation order is fixed so re-scoring
/// is bit-reproducible.  Throws ShapeError on size mismatches.
double grid_score(const GridModel& model, const Output& output);

/// Coverage-weighted score of one sub-model: unary[v]/node_coverage over all
/// nodes, then pairwise[e]/edge_coverage over the sub-model's edges.  Summed
/// over p these reproduce grid_score up to rounding.
double comb_score(const GridModel& model, const CombDecomposition& combs, std::uint32_t p,
                  const Output& output);

/// Sum of comb_score over every sub-model, in sub-model order.  This is the
/// arithmetic the ensemble tables and oracles share.
double joint_comb_score(const GridModel& model, const CombDecomposition& combs,
                        const Output& output);

/// Surviving states per grid node (each list sorted ascending, never empty).
using GridStates = std::vector<std::vector<State>>;

/// Every state at every node.
GridStates full_grid_states(std::uint32_t nodes, std::uint32_t num_labels);

/// Replaces each surviving coarse state with its fine children (sorted).
GridStates refine_grid_states(const GridStates& states, const StateHierarchy& hierarchy);

/// Number of complete outputs the restricted grid admits, saturating at cap.
std::uint64_t grid_total_outputs(const GridStates& states, std::uint64_t cap);

/// Summed max-marginals of an ensemble over restricted node states.
struct EnsembleTable {
  GridStates states;                        // the surviving lists, copied
  std::vector<std::vector<double>> summed;  // [node][state idx]: sum over sub-models
  std::vector<double> sub_max;              // per sub-model best score
  std::vector<double> sub_mean;             // per sub-model mean marginal
  /// Per sub-model marginals, sub_values[p][node][state idx]; summed is
  /// their sum accumulated in sub-model order.
  std::vector<std::vector<std::vector<double>>> sub_values;

  /// Sum over sub-models of their individual mean-max thresholds at alpha
  /// (summed in sub-model order).  Throws ConfigError unless alpha in [0,1).
  double joint_tau(double alpha) const;

  std::uint64_t total_assignments() const {
    std::uint64_t n = 0;
    for (const auto& s : states) n += s.size();
    return n;
  }
};

/// Runs tree max-sum independently in every sub-model of a potential-table
/// grid and sums the marginals.  Throws BrokenLatticeError (position = node)
/// on an empty node state list, ShapeError on shape mismatches.
EnsembleTable ensemble_max_marginals(const GridModel& model, const CombDecomposition& combs,
                                     const GridStates& states);

/// Keeps exactly the node-states whose summed marginal exceeds the joint
/// threshold.  A node losing all of its states is a cascade breakdown and
/// throws BreakdownError carrying the node id (no silent fallback).
GridStates joint_filter(const EnsembleTable& table, double alpha);

/// Fraction of node-states with summed marginal strictly above tau.
double joint_efficiency_loss(const EnsembleTable& table, double tau);

/// 1 when the truth's summed score fails to clear the joint threshold (or
/// the truth is not contained in the surviving states).
double joint_filtering_loss(const GridModel& model, const CombDecomposition& combs,
                            const GridStates& states, const Output& truth, double alpha);

/// Joint max-marginals by exhaustive enumeration, scoring every output with
/// joint_comb_score.  value[node][state idx] is the best score among outputs
/// using that state; refuses instances beyond 1e6 outputs (ConfigError).
struct JointTable {
  std::vector<std::vector<double>> value;
  double global_max = kNegInf;
};
JointTable brute_force_joint_max_marginals(const GridModel& model,
                                           const CombDecomposition& combs,
                                           const GridStates& states);

/// Per-node observation keys for a learned grid ensemble.
struct GridInput {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<Token> tokens;  // one per node, row-major
  std::uint32_t nodes() const { return static_cast<std::uint32_t>(tokens.size()); }
};

struct GridExample {
  GridInput input;
  Output truth;
};

struct GridDataset {
  std::uint32_t num_labels = 0;
  std::vector<GridExample> examples;
};

/// A learned ensemble: one hashed-feature linear model per comb.  Feature
/// values carry the coverage weights, so summing sub-model scores of equal
/// weight vectors reproduces a single full-grid model.
struct GridEnsembleModel {
  CombDecomposition combs;
  std::vector<LinearModel> models;  // one per sub-model

  std::uint32_t num_labels() const { return models.empty() ? 0 : models[0].num_labels(); }
};

/// Zero-weight ensemble of grid models over the comb decomposition.
GridEnsembleModel make_grid_ensemble(std::uint32_t rows, std::uint32_t cols,
                                     std::uint32_t dimension, std::uint32_t num_labels);

/// Coverage-weighted score of sub-model p on one input/output pair: hashed
/// unary sums per node divided by node coverage, then hashed pairwise sums
/// per sub-model edge divided by edge coverage, in canonical order.
double comb_score(const GridEnsembleModel& ensemble, std::uint32_t p, const GridInput& input,
                  const Output& output);

/// Sum of comb_score over sub-models, in sub-model order.
double joint_comb_score(const GridEnsembleModel& ensemble, const GridInput& input,
                        const Output& output);

/// Coverage-weighted feature vector of sub-model p (unary features valued
/// 1/node_coverage, pairwise 1/edge_coverage); theta_p . f_p = comb_score up
/// to summation order.
FeatureVector comb_featurize(const GridEnsembleModel& ensemble, std::uint32_t p,
                             const GridInput& input, const Output& output);

/// Learned-ensemble inference (same contract as the potential-table variant).
EnsembleTable ensemble_max_marginals(const GridEnsembleModel& ensemble,
                                     const GridInput& input, const GridStates& states);

/// Learned-ensemble filtering loss (see the potential-table variant).
double joint_filtering_loss(const GridEnsembleModel& ensemble, const GridInput& input,
                            const GridStates& states, const Output& truth, double alpha);

/// One example as it moves through a grid cascade.
struct GridTrainExample {
  GridInput input;
  Output truth;
  GridStates states;
  bool margin_active = true;
};

/// One joint subgradient step at step index t (1-based).  Every sub-model is
/// shrunk by (1 - eta lambda); when the joint margin is violated (sum of
/// sub-model truth scores < joint tau + margin) each sub-model additionally
/// receives its own ascent direction eta (f_p(truth) - alpha f_p(y*_p) -
/// (1-alpha)/N sum of witness features).
void joint_sc_step(GridEnsembleModel& ensemble, const GridTrainExample& example,
                   double alpha, const TrainConfig& config, std::uint64_t t);

/// Epochs of seeded shuffled joint_sc_step passes; margin-inactive examples
/// are skipped; averaging applies per sub-model.
GridEnsembleModel train_grid_ensemble(const GridEnsembleModel& init,
                                      std::span<const GridTrainExample> examples,
                                      double alpha, const TrainConfig& config);

/// Tunes the shared filtering alpha of a learned ensemble on a dev set:
/// minimizes mean joint efficiency loss subject to mean joint filtering loss
/// <= epsilon and no dev breakdown; ties prefer the larger alpha; falls back
/// to alpha = 0 when nothing is feasible.
AlphaChoice tune_joint_alpha(const GridEnsembleModel& ensemble,
                             std::span<const GridTrainExample> dev,
                             const std::vector<double>& candidates, double epsilon);

/// Configuration of one grid cascade level.
struct GridLevelConfig {
  std::vector<double> alpha_candidates{0.0, 0.2, 0.4, 0.6, 0.8};
  double tolerance = 0.01;
  TrainConfig train;
};

struct GridCascadeConfig {
  std::uint32_t dimension = 1u << 15;
  std::vector<GridLevelConfig> levels;
  /// Refinement applied after each level but the last; size = levels - 1.
  std::vector<StateHierarchy> hierarchies;
};

struct GridLevelReport {
  double train_alpha = 0.0;
  double alpha = 0.0;
  bool feasible = false;
  double dev_filter_loss = 0.0;
  double dev_efficiency_loss = 0.0;
  double dev_density = 0.0;  // surviving node-states / full space, post filter
  std::uint32_t truth_pruned_train = 0;
  std::uint32_t truth_pruned_dev = 0;
};

struct GridCascadeLevel {
  GridEnsembleModel ensemble;
  double alpha = 0.0;
  std::optional<StateHierarchy> hierarchy;  // refinement applied after this level
  GridLevelReport report;
};

struct TrainedGridCascade {
  std::vector<GridCascadeLevel> levels;
};

/// Node-centric coarse-to-fine training over grids: per level, train the
/// ensemble per candidate alpha, tune the joint alpha on dev, prune every
/// example's node states, refine the survivors for the next level.  A
/// breakdown while pruning propagates (BreakdownError).
TrainedGridCascade grid_coarse_to_fine(const GridDataset& train, const GridDataset& dev,
                                       const GridCascadeConfig& config);

/// Runs every level's joint filter on one input; returns the surviving
/// states at the finest alphabet.
GridStates apply_grid_cascade(const TrainedGridCascade& cascade, const GridInput& input);

struct GridCascadeEval {
  std::vector<double> level_filter_loss;
  std::vector<double> level_efficiency_loss;
  std::vector<double> level_density;
  double final_density = 0.0;
  /// Fraction of examples whose full truth survived every level.
  double truth_recall = 0.0;
  /// Examples on which some level emptied a node (counted, not propagated,
  /// so one broken example cannot abort a whole evaluation).
  std::uint32_t breakdowns = 0;
};

/// Replays the cascade on a labeled dataset and measures per-level joint
/// losses and final truth recall.
GridCascadeEval evaluate_grid_cascade(const TrainedGridCascade& cascade,
                                      const GridDataset& data);

}  // namespace cascade
