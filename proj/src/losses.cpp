// Loss implementations (see losses.hpp).

#include "cascade/losses.hpp"

#include <algorithm>

namespace cascade {

namespace {

void check_margin(double margin) {
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
}

}  // namespace

double filtering_loss(const LinearModel& model, const SequenceInput& input,
                      const Output& truth, const SparseLattice& lattice, double alpha) {
  if (!lattice.contains(truth)) return 1.0;
  MaxMarginalTable table = max_marginals(model, input, lattice);
  double tau = mean_max_threshold(table, alpha);
  return filtering_loss(score_output(model, input, truth), tau);
}

double efficiency_loss(const MaxMarginalTable& table, double tau) {
  std::uint64_t kept = 0, total = 0;
  for (const auto& anchor : table.value) {
    for (double v : anchor) kept += v > tau ? 1 : 0;
    total += anchor.size();
  }
  if (total == 0) throw ShapeError("empty max-marginal table");
  return static_cast<double>(kept) / static_cast<double>(total);
}

double hinge_loss(double truth_score, double tau, double margin) {
  check_margin(margin);
  return std::max(0.0, margin + tau - truth_score);
}

double hinge_loss(const LinearModel& model, const SequenceInput& input,
                  const Output& truth, const SparseLattice& lattice, double alpha,
                  double margin) {
  MaxMarginalTable table = max_marginals(model, input, lattice);
  double tau = mean_max_threshold(table, alpha);
  return hinge_loss(score_output(model, input, truth), tau, margin);
}

double ramp(double z, double gamma) {
  check_gamma(gamma);
  if (z < 0.0) return 1.0;
  if (z > gamma) return 0.0;
  return 1.0 - z / gamma;
}

std::pair<double, double> ramp_losses(double truth_score, const MaxMarginalTable& table,
                                      double tau, double gamma) {
  check_gamma(gamma);
  double rf = ramp(truth_score - tau, gamma);
  double sum = 0.0;
  std::uint64_t total = 0;
  for (const auto& anchor : table.value) {
    for (double v : anchor) sum += ramp(tau - v, gamma);
    total += anchor.size();
  }
  if (total == 0) throw ShapeError("empty max-marginal table");
  return {rf, sum / static_cast<double>(total)};
}

LossReport loss_report(const LinearModel& model, const SequenceInput& input,
                       const Output& truth, const SparseLattice& lattice, double alpha,
                       double margin, double gamma) {
  MaxMarginalTable table = max_marginals(model, input, lattice);
  double tau = mean_max_threshold(table, alpha);
  double score = score_output(model, input, truth);
  bool contained = lattice.contains(truth);

  LossReport r;
  r.filter_loss = contained ? filtering_loss(score, tau) : 1.0;
  r.efficiency_loss = efficiency_loss(table, tau);
  r.hinge = hinge_loss(score, tau, margin);
  // An upstream-pruned truth counts as a full filtering mistake for the ramp
  // as well, keeping the dominance filter_loss <= ramp_filter intact.
  auto [rf, re] = ramp_losses(score, table, tau, gamma);
  r.ramp_filter = contained ? rf : 1.0;
  r.ramp_efficiency = re;
  return r;
}

}  // namespace cascade
