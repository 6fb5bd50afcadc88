// Mean-max thresholding and pruning (see threshold.hpp).

#include "cascade/threshold.hpp"

#include <cmath>
#include <string>

namespace cascade {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in [0,1), got " + std::to_string(alpha));
}

// ShapeError unless the table was computed over this lattice's survivors.
void check_table(const SparseLattice& lat, std::size_t anchors,
                 const std::vector<std::vector<double>>& value) {
  if (anchors != lat.anchors() || value.size() != anchors)
    throw ShapeError("marginal table does not match the lattice");
  for (std::uint32_t a = 0; a < lat.anchors(); ++a)
    if (value[a].size() != lat.count(a))
      throw ShapeError("marginal table does not match the lattice");
}

}  // namespace

double mean_marginal(const std::vector<std::vector<double>>& value) {
  double sum = 0.0;
  std::uint64_t n = 0;
  for (const auto& anchor : value) {
    for (double v : anchor) {
      if (!std::isfinite(v))
        throw NumericError("non-finite max-marginal; threshold undefined");
      sum += v;
    }
    n += anchor.size();
  }
  if (n == 0) throw ShapeError("empty max-marginal table");
  return sum / static_cast<double>(n);
}

double mean_marginal(const MaxMarginalTable& table) { return mean_marginal(table.value); }

double mean_max_threshold(const MaxMarginalTable& table, double alpha) {
  check_alpha(alpha);
  return mean_max_tau(table.global_max, mean_marginal(table), alpha);
}

SparseLattice filter(const SparseLattice& lattice, const MaxMarginalTable& table,
                     double tau) {
  check_table(lattice, table.value.size(), table.value);
  if (!(tau < table.global_max))
    throw PruneAllError("threshold reaches the best score; nothing would survive");
  std::vector<std::vector<char>> keep(lattice.anchors());
  for (std::uint32_t a = 0; a < lattice.anchors(); ++a) {
    keep[a].resize(lattice.count(a));
    for (std::uint32_t i = 0; i < lattice.count(a); ++i)
      keep[a][i] = table.value[a][i] > tau ? 1 : 0;
  }
  return filter_assignments(lattice, keep);
}

FilterOutcome meanmax_filter(const SparseLattice& lattice, const MaxMarginalTable& table,
                             double alpha) {
  double tau = mean_max_threshold(table, alpha);
  if (tau >= table.global_max) {
    // All marginals tie with the maximum, so the cutoff would prune
    // everything; keep the lattice as is and report the degeneracy.
    return {lattice, tau, true};
  }
  return {filter(lattice, table, tau), tau, false};
}

SparseLattice crf_filter(const SparseLattice& lattice, const LogMarginalTable& posteriors,
                         double alpha) {
  check_alpha(alpha);
  check_table(lattice, posteriors.posterior.size(), posteriors.posterior);
  std::vector<std::vector<char>> keep(lattice.anchors());
  for (std::uint32_t a = 0; a < lattice.anchors(); ++a) {
    keep[a].resize(lattice.count(a));
    for (std::uint32_t i = 0; i < lattice.count(a); ++i)
      keep[a][i] = posteriors.posterior[a][i] > alpha ? 1 : 0;
  }
  return filter_assignments(lattice, keep);
}

}  // namespace cascade
