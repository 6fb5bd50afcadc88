// Brute-force oracles shared by the test executables: independent,
// enumeration-based reimplementations of scoring, max-marginals, posteriors,
// threshold tuning, and gradients.  Everything here favors obviousness over
// speed — alphabets and lengths stay tiny in tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cascade/inference.hpp"
#include "cascade/lattice.hpp"
#include "cascade/model.hpp"
#include "cascade/rng.hpp"
#include "cascade/threshold.hpp"

namespace oracle {

using cascade::CliqueAssignment;
using cascade::LinearModel;
using cascade::Output;
using cascade::Rng;
using cascade::SequenceInput;
using cascade::SparseLattice;
using cascade::State;
using cascade::Transition;

/// Every complete output the lattice admits, found by testing all
/// num_labels^length candidates against SparseLattice::contains.
inline std::vector<Output> all_outputs(const SparseLattice& lattice) {
  std::vector<Output> found;
  Output y(lattice.length(), 0);
  while (true) {
    if (lattice.contains(y)) found.push_back(y);
    std::uint32_t t = lattice.length();
    while (t-- > 0) {
      if (++y[t] < lattice.num_labels()) break;
      y[t] = 0;
      if (t == 0) return found;
    }
  }
}

/// Clique-by-clique score: every n-gram of sizes 1..order+1, scored with
/// score_clique and summed in the canonical order (last covered position
/// ascending, then size ascending).  Independent fold over the same clique
/// scores score_output uses, so agreement must be bit-exact.
inline double score(const LinearModel& model, const SequenceInput& input, const Output& y) {
  double total = 0.0;
  const std::uint32_t length = static_cast<std::uint32_t>(y.size());
  for (std::uint32_t last = 0; last < length; ++last)
    for (std::uint32_t size = 1; size <= std::min(model.order() + 1, last + 1); ++size) {
      CliqueAssignment c;
      c.position = last - size + 1;
      c.states.assign(y.begin() + c.position, y.begin() + last + 1);
      total += score_clique(model, input, c);
    }
  return total;
}

struct MmOracle {
  std::vector<std::vector<double>> value;  // [anchor][assignment], -inf if unreachable
  double global_max = cascade::kNegInf;
  Output argmax;  // lexicographically smallest among score ties
};

/// Max-marginals by enumerating every complete output and taking, per
/// surviving assignment, the best consistent score.
inline MmOracle max_marginals(const LinearModel& model, const SequenceInput& input,
                              const SparseLattice& lattice) {
  MmOracle o;
  o.value.resize(lattice.anchors());
  for (std::uint32_t a = 0; a < lattice.anchors(); ++a)
    o.value[a].assign(lattice.count(a), cascade::kNegInf);
  for (const Output& y : all_outputs(lattice)) {
    const double s = score(model, input, y);
    for (std::uint32_t a = 0; a < lattice.anchors(); ++a) {
      const std::uint32_t idx =
          lattice.find(a, std::span<const State>(y.data() + a, lattice.order()));
      if (s > o.value[a][idx]) o.value[a][idx] = s;
    }
    if (s > o.global_max) {
      o.global_max = s;
      o.argmax = y;
    }
  }
  return o;
}

struct PosteriorOracle {
  std::vector<std::vector<double>> posterior;       // [anchor][assignment]
  std::vector<std::vector<double>> edge_posterior;  // [pair][transition]
  double log_partition = 0.0;
};

/// Gibbs posteriors by direct summation of exp(score) over all outputs.
inline PosteriorOracle posteriors(const LinearModel& model, const SequenceInput& input,
                                  const SparseLattice& lattice) {
  const std::vector<Output> outputs = all_outputs(lattice);
  std::vector<double> scores(outputs.size());
  double mx = cascade::kNegInf;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    scores[i] = score(model, input, outputs[i]);
    mx = std::max(mx, scores[i]);
  }
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);

  PosteriorOracle o;
  o.log_partition = mx + std::log(z);
  o.posterior.resize(lattice.anchors());
  for (std::uint32_t a = 0; a < lattice.anchors(); ++a)
    o.posterior[a].assign(lattice.count(a), 0.0);
  o.edge_posterior.resize(lattice.anchors() ? lattice.anchors() - 1 : 0);
  for (std::uint32_t pr = 0; pr + 1 < lattice.anchors(); ++pr)
    o.edge_posterior[pr].assign(lattice.transitions(pr).size(), 0.0);

  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const Output& y = outputs[i];
    const double p = std::exp(scores[i] - o.log_partition);
    for (std::uint32_t a = 0; a < lattice.anchors(); ++a) {
      const std::uint32_t idx =
          lattice.find(a, std::span<const State>(y.data() + a, lattice.order()));
      o.posterior[a][idx] += p;
    }
    for (std::uint32_t pr = 0; pr + 1 < lattice.anchors(); ++pr) {
      const std::uint32_t left =
          lattice.find(pr, std::span<const State>(y.data() + pr, lattice.order()));
      const std::uint32_t right =
          lattice.find(pr + 1, std::span<const State>(y.data() + pr + 1, lattice.order()));
      const auto& trans = lattice.transitions(pr);
      for (std::size_t t = 0; t < trans.size(); ++t)
        if (trans[t].first == left && trans[t].second == right) {
          o.edge_posterior[pr][t] += p;
          break;
        }
    }
  }
  return o;
}

/// Central finite differences of a scalar function of the weight vector at
/// the listed coordinates.
template <class F>
std::vector<double> fd_gradient(F&& f, std::vector<double>& theta,
                                const std::vector<std::size_t>& coords, double h) {
  std::vector<double> g;
  g.reserve(coords.size());
  for (std::size_t d : coords) {
    const double keep = theta[d];
    theta[d] = keep + h;
    const double up = f();
    theta[d] = keep - h;
    const double down = f();
    theta[d] = keep;
    g.push_back((up - down) / (2.0 * h));
  }
  return g;
}

/// Uniform random weights in [lo, hi].
inline void randomize(LinearModel& model, Rng& rng, double lo, double hi) {
  for (double& w : model.weights()) w = rng.uniform(lo, hi);
}

/// Random input: one "k<id>" key per position from a small key pool.
inline SequenceInput random_input(Rng& rng, std::uint32_t length, std::uint32_t pool = 5) {
  SequenceInput in;
  in.tokens.reserve(length);
  for (std::uint32_t t = 0; t < length; ++t)
    in.tokens.push_back({"k" + std::to_string(rng.uniform_int(pool))});
  return in;
}

inline Output random_output(Rng& rng, std::uint32_t length, std::uint32_t num_labels) {
  Output y(length);
  for (auto& s : y) s = static_cast<State>(rng.uniform_int(num_labels));
  return y;
}

/// A random sub-lattice: start from the full order-d space and drop each
/// assignment with probability drop, always keeping at least one per anchor
/// plus every assignment of one random surviving output (so a complete path
/// exists).  Transitions are rebuilt from the survivor lists.
inline SparseLattice random_lattice(Rng& rng, std::uint32_t length, std::uint32_t num_labels,
                                    std::uint32_t order, double drop) {
  const Output spine = random_output(rng, length, num_labels);
  std::vector<std::vector<State>> flat(length - order + 1);
  const SparseLattice full = SparseLattice::full(length, num_labels, order);
  for (std::uint32_t a = 0; a < full.anchors(); ++a) {
    for (std::uint32_t i = 0; i < full.count(a); ++i) {
      const auto tuple = full.tuple(a, i);
      const bool on_spine = std::equal(tuple.begin(), tuple.end(), spine.begin() + a);
      if (!on_spine && rng.u01() < drop) continue;
      flat[a].insert(flat[a].end(), tuple.begin(), tuple.end());
    }
  }
  return SparseLattice::from_survivors(length, num_labels, order, std::move(flat));
}

/// Drops assignments that lie on no complete path, so every max-marginal of
/// the result is finite.  Lattices produced by max-marginal filtering already
/// have this property; arbitrary survivor lists need not.
inline SparseLattice prune_pathless(const SparseLattice& lat) {
  const std::uint32_t anchors = lat.anchors();
  std::vector<std::vector<char>> fwd(anchors), bwd(anchors);
  for (std::uint32_t a = 0; a < anchors; ++a) {
    fwd[a].assign(lat.count(a), a == 0 ? 1 : 0);
    bwd[a].assign(lat.count(a), a + 1 == anchors ? 1 : 0);
  }
  for (std::uint32_t p = 0; p + 1 < anchors; ++p)
    for (const Transition& t : lat.transitions(p))
      if (fwd[p][t.first]) fwd[p + 1][t.second] = 1;
  for (std::uint32_t p = anchors - 1; p-- > 0;)
    for (const Transition& t : lat.transitions(p))
      if (bwd[p + 1][t.second]) bwd[p][t.first] = 1;
  std::vector<std::vector<State>> flat(anchors);
  for (std::uint32_t a = 0; a < anchors; ++a)
    for (std::uint32_t i = 0; i < lat.count(a); ++i)
      if (fwd[a][i] && bwd[a][i]) {
        const auto tuple = lat.tuple(a, i);
        flat[a].insert(flat[a].end(), tuple.begin(), tuple.end());
      }
  return SparseLattice::from_survivors(lat.length(), lat.num_labels(), lat.order(),
                                       std::move(flat));
}

/// random_lattice with path-less assignments removed.
inline SparseLattice random_connected_lattice(Rng& rng, std::uint32_t length,
                                              std::uint32_t num_labels, std::uint32_t order,
                                              double drop) {
  return prune_pathless(random_lattice(rng, length, num_labels, order, drop));
}

}  // namespace oracle
