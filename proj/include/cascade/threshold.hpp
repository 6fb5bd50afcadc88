// Max-mean-max thresholding and the pruning step.
//
// The pruning cutoff for one example is a convex combination of the best
// score and the mean max-marginal, tau = alpha*max + (1-alpha)*mean, with
// alpha in [0,1).  Assignments survive strictly above tau; because the
// global argmax path scores above the mean whenever any spread exists, the
// filtered lattice always retains at least one complete output.

#pragma once

#include "cascade/inference.hpp"
#include "cascade/lattice.hpp"

namespace cascade {

/// Combines a best score and a mean marginal into the pruning cutoff.
/// Single definition shared by filtering, losses, and alpha tuning so the
/// arithmetic (and hence tie behavior) is identical everywhere.
inline double mean_max_tau(double global_max, double mean, double alpha) {
  return alpha * global_max + (1.0 - alpha) * mean;
}

/// Mean max-marginal over every surviving assignment, accumulated in anchor
/// order then assignment order and divided by the total survivor count.
/// Throws NumericError if any marginal is non-finite, ShapeError on an
/// empty table.
double mean_marginal(const std::vector<std::vector<double>>& value);
double mean_marginal(const MaxMarginalTable& table);

/// tau(x; theta, alpha) = alpha*global_max + (1-alpha)*mean_marginal.
/// Throws ConfigError unless 0 <= alpha < 1.
double mean_max_threshold(const MaxMarginalTable& table, double alpha);

/// Keeps exactly the assignments with max-marginal strictly above tau and
/// rebuilds transitions.  Throws PruneAllError when tau >= global_max (the
/// cutoff would remove every assignment), ShapeError if the table does not
/// match the lattice.
SparseLattice filter(const SparseLattice& lattice, const MaxMarginalTable& table,
                     double tau);

/// One mean-max filtering step.
struct FilterOutcome {
  SparseLattice lattice;
  double tau = 0.0;
  /// True when every marginal tied with the maximum (tau >= max), in which
  /// case nothing is pruned instead of everything; callers may warn.
  bool kept_all = false;
};

/// Computes tau from the table and filters.  Degenerate tables where the
/// mean reaches the maximum (all marginals equal) keep all assignments and
/// set kept_all rather than erroring.
FilterOutcome meanmax_filter(const SparseLattice& lattice, const MaxMarginalTable& table,
                             double alpha);

/// Baseline pruning by posterior mass: keeps assignments with
/// P(y_c|x) > alpha.  Unlike mean-max filtering there is no survival
/// guarantee; an emptied position throws BrokenLatticeError, which callers
/// are expected to surface.  Throws ConfigError unless 0 <= alpha < 1.
SparseLattice crf_filter(const SparseLattice& lattice, const LogMarginalTable& posteriors,
                         double alpha);

}  // namespace cascade
