// Max-marginal, MAP, and sum-product inference over sparse lattices.
//
// max_marginals computes, for every surviving assignment y_c, the score of
// the best complete output consistent with it (its max-marginal) together
// with a witness output attaining that score.  Reported values are the exact
// left-to-right clique-sum of the witness, so score_output(witness) equals
// the stored max-marginal bit-for-bit.  Dynamic-programming messages are used
// only to pick argmaxes; ties prefer the lexicographically smallest state
// tuple at each max.
//
// Assignments that lie on no complete path (possible only on lattices built
// by posterior filtering, never by max-marginal filtering) get value -inf and
// an empty witness.

#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "cascade/lattice.hpp"
#include "cascade/model.hpp"

namespace cascade {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Max-marginals and witnesses for every assignment of a lattice.
struct MaxMarginalTable {
  std::uint32_t anchors = 0;
  std::uint32_t order = 0;
  std::vector<std::vector<double>> value;    // [anchor][assignment]
  std::vector<std::vector<Output>> witness;  // [anchor][assignment]
  double global_max = kNegInf;               // max over the table
  Output global_argmax;                      // lexicographically smallest MAP output

  std::uint64_t total_assignments() const {
    std::uint64_t n = 0;
    for (const auto& v : value) n += v.size();
    return n;
  }
};

/// Per-assignment posterior probabilities under the Gibbs distribution
/// proportional to exp(score).  Posteriors at each anchor sum to 1 (within
/// floating-point tolerance); log_partition is the log normalizer.
struct LogMarginalTable {
  std::uint32_t anchors = 0;
  std::uint32_t order = 0;
  std::vector<std::vector<double>> posterior;  // [anchor][assignment]
  double log_partition = 0.0;
};

/// Sum-product results extended with per-transition posteriors, aligned with
/// lattice.transitions(pair).  Needed for log-loss gradients.
struct SumProductResult {
  LogMarginalTable table;
  std::vector<std::vector<double>> edge_posterior;  // [pair][transition]
};

/// Max-marginals of every surviving assignment (see file comment).
/// Requires model.order() <= lattice.order() (ShapeError) and input length
/// == lattice length (ShapeError).
MaxMarginalTable max_marginals(const LinearModel& model, const SequenceInput& input,
                               const SparseLattice& lattice);

/// The lexicographically smallest maximum-scoring complete output and its
/// exact score.  Throws BrokenLatticeError if no complete path exists.
std::pair<Output, double> map_decode(const LinearModel& model, const SequenceInput& input,
                                     const SparseLattice& lattice);

/// Log-space sum-product posteriors over assignments.
LogMarginalTable sum_product_marginals(const LinearModel& model, const SequenceInput& input,
                                       const SparseLattice& lattice);

/// Sum-product with per-transition posteriors.
SumProductResult sum_product_full(const LinearModel& model, const SequenceInput& input,
                                  const SparseLattice& lattice);

/// Reference implementation by exhaustive enumeration of the lattice's
/// complete outputs in lexicographic order.  Refuses instances beyond the
/// guard of 1e6 complete outputs (ConfigError).  Agrees exactly with
/// max_marginals on values, global max, and MAP output.
MaxMarginalTable brute_force_max_marginals(const LinearModel& model,
                                           const SequenceInput& input,
                                           const SparseLattice& lattice);

/// Number of complete outputs the lattice admits, saturating at `cap`.
std::uint64_t count_complete_outputs(const SparseLattice& lattice, std::uint64_t cap);

/// Projects an order-d table onto order-(d-1) subcliques: the sub-lattice
/// holds every (d-1)-gram occurring as a prefix or suffix of a surviving
/// d-gram, and each sub-assignment's max-marginal is the max over the
/// assignments containing it (witness carried over).  Requires d >= 2.
/// Filtering the projection and re-expanding realizes subclique filtering.
std::pair<SparseLattice, MaxMarginalTable> project_to_subcliques(
    const SparseLattice& lattice, const MaxMarginalTable& table);

}  // namespace cascade
