// Filtering, efficiency, hinge, and ramp losses: definitions, bounds, and the
// relationships the learning step depends on (hinge >= margin * filter loss,
// ramps dominating their 0-1 counterparts).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cascade/losses.hpp"
#include "cascade/rng.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

struct Instance {
  LinearModel model;
  SequenceInput input;
  Output truth;
  SparseLattice lattice;
  MaxMarginalTable table;
};

Instance random_instance(Rng& rng, bool contain_truth) {
  Instance inst{LinearModel::chain(512, 3, 2), {}, {}, SparseLattice::full(1, 1, 1), {}};
  oracle::randomize(inst.model, rng, -4.0, 4.0);
  const std::uint32_t length = 4 + rng.uniform_int(3);
  inst.input = oracle::random_input(rng, length);
  inst.lattice = oracle::random_connected_lattice(rng, length, 3, 2, 0.3);
  if (contain_truth) {
    const auto outs = oracle::all_outputs(inst.lattice);
    inst.truth = outs[rng.uniform_int(static_cast<std::uint32_t>(outs.size()))];
  } else {
    do {
      inst.truth = oracle::random_output(rng, length, 3);
    } while (inst.lattice.contains(inst.truth));
  }
  inst.table = max_marginals(inst.model, inst.input, inst.lattice);
  return inst;
}

}  // namespace

TEST_CASE("filtering loss is the indicator of score <= tau") {
  CHECK(filtering_loss(1.0, 2.0) == 1.0);
  CHECK(filtering_loss(2.0, 2.0) == 1.0);  // ties count as pruned
  CHECK(filtering_loss(2.0 + 1e-12, 2.0) == 0.0);

  Rng rng(301);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance inst = random_instance(rng, true);
    const double alpha = rng.uniform(0.0, 0.9);
    const double tau = mean_max_threshold(inst.table, alpha);
    const double s = score_output(inst.model, inst.input, inst.truth);
    CHECK(filtering_loss(inst.model, inst.input, inst.truth, inst.lattice, alpha) ==
          filtering_loss(s, tau));
  }
}

TEST_CASE("truth outside the lattice counts as a filtering mistake") {
  Rng rng(307);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance inst = random_instance(rng, false);
    CHECK(filtering_loss(inst.model, inst.input, inst.truth, inst.lattice, 0.3) == 1.0);
  }
}

TEST_CASE("efficiency loss counts strict survivors over the total") {
  Rng rng(311);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance inst = random_instance(rng, true);
    const double alpha = rng.uniform(0.0, 0.9);
    const double tau = mean_max_threshold(inst.table, alpha);
    std::uint64_t survivors = 0, total = 0;
    for (const auto& row : inst.table.value)
      for (double v : row) {
        ++total;
        if (v > tau) ++survivors;
      }
    CHECK(efficiency_loss(inst.table, tau) ==
          static_cast<double>(survivors) / static_cast<double>(total));
    // Monotone in alpha: larger alpha prunes at least as much.
    const double tau2 = mean_max_threshold(inst.table, std::min(0.95, alpha + 0.05));
    CHECK(efficiency_loss(inst.table, tau2) <= efficiency_loss(inst.table, tau));
  }
}

TEST_CASE("hinge upper-bounds margin times the filtering loss") {
  Rng rng(313);
  for (int trial = 0; trial < 200; ++trial) {
    const double tau = rng.uniform(-10.0, 10.0);
    const double s = tau + rng.uniform(-5.0, 5.0);
    const double margin = 0.1 + rng.uniform(0.0, 5.0);
    const double h = hinge_loss(s, tau, margin);
    CHECK(h >= 0.0);
    CHECK(h >= margin * filtering_loss(s, tau));
    // Exact form.
    CHECK(h == std::max(0.0, margin + tau - s));
  }
  CHECK_THROWS_AS(hinge_loss(0.0, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(hinge_loss(0.0, 0.0, -1.0), ConfigError);

  Rng rng2(317);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = random_instance(rng2, true);
    const double alpha = rng2.uniform(0.0, 0.9);
    const double margin = static_cast<double>(inst.input.length());
    const double tau = mean_max_threshold(inst.table, alpha);
    const double s = score_output(inst.model, inst.input, inst.truth);
    CHECK(hinge_loss(inst.model, inst.input, inst.truth, inst.lattice, alpha, margin) ==
          hinge_loss(s, tau, margin));
  }
}

TEST_CASE("ramp is 1 below zero, linear on [0,gamma], 0 beyond") {
  CHECK(ramp(-0.5, 1.0) == 1.0);
  CHECK(ramp(0.0, 1.0) == 1.0);
  CHECK(ramp(0.25, 1.0) == 0.75);
  CHECK(ramp(1.0, 1.0) == 0.0);
  CHECK(ramp(7.0, 1.0) == 0.0);
  CHECK(ramp(1.0, 4.0) == 0.75);
  CHECK_THROWS_AS(ramp(0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(ramp(0.0, -2.0), ConfigError);
  // Dominates the step function 1[z <= 0] and is nonincreasing.
  Rng rng(331);
  for (int trial = 0; trial < 200; ++trial) {
    const double z = rng.uniform(-3.0, 3.0);
    const double g = 0.1 + rng.uniform(0.0, 3.0);
    CHECK(ramp(z, g) >= (z <= 0.0 ? 1.0 : 0.0));
    CHECK(ramp(z, g) >= ramp(z + 0.1, g));
    CHECK(ramp(z, g) >= 0.0);
    CHECK(ramp(z, g) <= 1.0);
  }
}

TEST_CASE("ramp losses dominate the 0-1 losses pointwise") {
  Rng rng(337);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance inst = random_instance(rng, true);
    const double alpha = rng.uniform(0.0, 0.9);
    const double gamma = 0.25 + rng.uniform(0.0, 2.0);
    const double tau = mean_max_threshold(inst.table, alpha);
    const double s = score_output(inst.model, inst.input, inst.truth);
    const auto [rf, re] = ramp_losses(s, inst.table, tau, gamma);
    CHECK(rf >= filtering_loss(s, tau));
    CHECK(re >= efficiency_loss(inst.table, tau));
    CHECK(rf == ramp(s - tau, gamma));
    // Efficiency ramp is the mean of per-assignment ramps of tau - m.
    double mean = 0.0;
    std::uint64_t n = 0;
    for (const auto& row : inst.table.value)
      for (double v : row) {
        mean += ramp(tau - v, gamma);
        ++n;
      }
    CHECK(re == doctest::Approx(mean / static_cast<double>(n)).epsilon(1e-12));
  }
}

TEST_CASE("loss_report bundles the individual definitions") {
  Rng rng(347);
  for (int trial = 0; trial < 40; ++trial) {
    const bool contained = trial % 4 != 0;
    const Instance inst = random_instance(rng, contained);
    const double alpha = rng.uniform(0.0, 0.9);
    const double margin = static_cast<double>(inst.input.length());
    const LossReport r =
        loss_report(inst.model, inst.input, inst.truth, inst.lattice, alpha, margin);
    const double tau = mean_max_threshold(inst.table, alpha);
    CHECK(r.filter_loss ==
          filtering_loss(inst.model, inst.input, inst.truth, inst.lattice, alpha));
    CHECK(r.efficiency_loss == efficiency_loss(inst.table, tau));
    if (contained) {
      const double s = score_output(inst.model, inst.input, inst.truth);
      CHECK(r.hinge == hinge_loss(s, tau, margin));
      const auto [rf, re] = ramp_losses(s, inst.table, tau, 1.0);
      CHECK(r.ramp_filter == rf);
      CHECK(r.ramp_efficiency == re);
    }
    // The hinge bounds the score-based loss; the not-contained convention
    // (filter_loss forced to 1) is outside what the surrogate can see.
    if (contained) CHECK(r.hinge >= margin * r.filter_loss);
    CHECK(r.ramp_filter >= r.filter_loss);
    CHECK(r.ramp_efficiency >= r.efficiency_loss);
  }
}
