// Filtering, efficiency, hinge, and ramp losses.
//
// For one example with truth y and threshold tau over its max-marginal
// table:
//   filtering loss   L_f = 1[score(y) <= tau]           (pruning mistake)
//   efficiency loss  L_e = |{y_c : m(y_c) > tau}| / N    (work left over)
//   hinge            H   = max{0, margin + tau - score(y)}
//   ramp pair        r_gamma applied to score(y)-tau and tau-m(y_c)
// The hinge upper-bounds margin*L_f and is convex in the weights; the ramp
// losses dominate their 0-1 counterparts pointwise.

#pragma once

#include "cascade/inference.hpp"
#include "cascade/model.hpp"
#include "cascade/threshold.hpp"

namespace cascade {

/// All per-example losses in one bundle.
struct LossReport {
  double filter_loss = 0.0;      // 0 or 1
  double efficiency_loss = 0.0;  // in [0,1]
  double hinge = 0.0;            // >= 0
  double ramp_filter = 0.0;      // in [0,1], >= filter_loss
  double ramp_efficiency = 0.0;  // in [0,1], >= efficiency_loss
};

/// 1[truth_score <= tau]: the sufficient condition for a truth clique to be
/// pruned at tau.
inline double filtering_loss(double truth_score, double tau) {
  return truth_score <= tau ? 1.0 : 0.0;
}

/// Filtering loss from scratch.  Truth not contained in the lattice counts
/// as 1 by convention (it was pruned upstream).  Alpha in [0,1).
double filtering_loss(const LinearModel& model, const SequenceInput& input,
                      const Output& truth, const SparseLattice& lattice, double alpha);

/// Fraction of assignments surviving strictly above tau.
double efficiency_loss(const MaxMarginalTable& table, double tau);

/// max{0, margin + tau - truth_score}; margin must be positive.
double hinge_loss(double truth_score, double tau, double margin);

/// Hinge from scratch: tau comes from the lattice's mean-max threshold.
double hinge_loss(const LinearModel& model, const SequenceInput& input,
                  const Output& truth, const SparseLattice& lattice, double alpha,
                  double margin);

/// The ramp r_gamma(z): 1 for z < 0, 1 - z/gamma on [0, gamma], 0 beyond.
/// Gamma must be positive (ConfigError).
double ramp(double z, double gamma);

/// Margin-smoothed losses: (r_gamma(truth_score - tau),
/// mean over assignments of r_gamma(tau - m(y_c))).
std::pair<double, double> ramp_losses(double truth_score, const MaxMarginalTable& table,
                                      double tau, double gamma);

/// Everything at once for one example, computing the table and threshold
/// internally.  Default gamma is 1.
LossReport loss_report(const LinearModel& model, const SequenceInput& input,
                       const Output& truth, const SparseLattice& lattice, double alpha,
                       double margin, double gamma = 1.0);

}  // namespace cascade
