// Public inference operations (see inference.hpp).

#include "cascade/inference.hpp"

#include <algorithm>
#include <string>

#include "chain_engine.hpp"

namespace cascade {

MaxMarginalTable max_marginals(const LinearModel& model, const SequenceInput& input,
                               const SparseLattice& lattice) {
  return detail::ChainEngine(model, input, lattice).max_marginal_table();
}

std::pair<Output, double> map_decode(const LinearModel& model, const SequenceInput& input,
                                     const SparseLattice& lattice) {
  return detail::ChainEngine(model, input, lattice).decode();
}

LogMarginalTable sum_product_marginals(const LinearModel& model, const SequenceInput& input,
                                       const SparseLattice& lattice) {
  return detail::ChainEngine(model, input, lattice).sum_product().table;
}

SumProductResult sum_product_full(const LinearModel& model, const SequenceInput& input,
                                  const SparseLattice& lattice) {
  return detail::ChainEngine(model, input, lattice).sum_product();
}

std::uint64_t count_complete_outputs(const SparseLattice& lat, std::uint64_t cap) {
  const std::uint32_t P = lat.anchors();
  std::vector<std::uint64_t> cur(lat.count(0), 1);
  for (std::uint32_t p = 0; p + 1 < P; ++p) {
    std::vector<std::uint64_t> next(lat.count(p + 1), 0);
    for (const Transition& t : lat.transitions(p)) {
      next[t.second] += cur[t.first];
      if (next[t.second] > cap) next[t.second] = cap + 1;
    }
    cur = std::move(next);
  }
  std::uint64_t total = 0;
  for (std::uint64_t c : cur) {
    total += c;
    if (total > cap) return cap + 1;
  }
  return total;
}

MaxMarginalTable brute_force_max_marginals(const LinearModel& model,
                                           const SequenceInput& input,
                                           const SparseLattice& lat) {
  constexpr std::uint64_t kGuard = 1'000'000;
  if (input.length() != lat.length())
    throw ShapeError("input length does not match lattice length");
  if (count_complete_outputs(lat, kGuard) > kGuard)
    throw ConfigError("brute-force enumeration refused: more than 1e6 complete outputs");

  const std::uint32_t P = lat.anchors();
  MaxMarginalTable t;
  t.anchors = P;
  t.order = lat.order();
  t.value.resize(P);
  t.witness.resize(P);
  for (std::uint32_t i = 0; i < P; ++i) {
    t.value[i].assign(lat.count(i), kNegInf);
    t.witness[i].resize(lat.count(i));
  }

  // Successor adjacency (transition lists are sorted by (left, right)).
  std::vector<std::vector<std::vector<std::uint32_t>>> succ(P > 0 ? P - 1 : 0);
  for (std::uint32_t p = 0; p + 1 < P; ++p) {
    succ[p].resize(lat.count(p));
    for (const Transition& tr : lat.transitions(p)) succ[p][tr.first].push_back(tr.second);
  }

  // Depth-first enumeration in lexicographic order; strict improvement keeps
  // the lexicographically smallest argmax everywhere.
  std::vector<std::uint32_t> idxs(P, 0);
  Output y;
  auto visit = [&](auto&& self, std::uint32_t depth) -> void {
    if (depth == P) {
      y.resize(lat.length());
      std::span<const State> first = lat.tuple(0, idxs[0]);
      std::copy(first.begin(), first.end(), y.begin());
      for (std::uint32_t i = 1; i < P; ++i) y[lat.order() + i - 1] = lat.tuple(i, idxs[i]).back();
      double s = score_output(model, input, y);
      for (std::uint32_t i = 0; i < P; ++i) {
        if (s > t.value[i][idxs[i]]) {
          t.value[i][idxs[i]] = s;
          t.witness[i][idxs[i]] = y;
        }
      }
      if (s > t.global_max) {
        t.global_max = s;
        t.global_argmax = y;
      }
      return;
    }
    if (depth == 0) {
      for (std::uint32_t b = 0; b < lat.count(0); ++b) {
        idxs[0] = b;
        self(self, 1);
      }
    } else {
      for (std::uint32_t r : succ[depth - 1][idxs[depth - 1]]) {
        idxs[depth] = r;
        self(self, depth + 1);
      }
    }
  };
  visit(visit, 0);
  return t;
}

std::pair<SparseLattice, MaxMarginalTable> project_to_subcliques(
    const SparseLattice& lat, const MaxMarginalTable& table) {
  const std::uint32_t d = lat.order();
  if (d < 2) throw ConfigError("subclique projection requires order >= 2");

  const std::uint32_t P = lat.anchors();
  const std::uint32_t Psub = P + 1;

  // Collect the surviving (d-1)-grams per sub-anchor with, for each, the
  // running max over containing assignments.  Containers are scanned in a
  // deterministic order: prefixes of the same anchor first (ascending), then
  // suffixes of the previous anchor (ascending); strict improvement keeps
  // the first witness among ties.
  std::vector<std::vector<State>> flat(Psub);
  std::vector<std::vector<double>> vals(Psub);
  std::vector<std::vector<Output>> wits(Psub);

  std::vector<State> key(d - 1);
  for (std::uint32_t j = 0; j < Psub; ++j) {
    // Gather candidate sub-grams (sorted, unique) from both container kinds.
    std::vector<std::vector<State>> tuples;
    auto consider = [&](std::span<const State> g) {
      tuples.emplace_back(g.begin(), g.end());
    };
    if (j < P)
      for (std::uint32_t i = 0; i < lat.count(j); ++i)
        consider(lat.tuple(j, i).first(d - 1));
    if (j > 0)
      for (std::uint32_t i = 0; i < lat.count(j - 1); ++i)
        consider(lat.tuple(j - 1, i).subspan(1));
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());

    vals[j].assign(tuples.size(), kNegInf);
    wits[j].resize(tuples.size());
    auto find_sub = [&](std::span<const State> g) {
      std::vector<State> probe(g.begin(), g.end());
      return static_cast<std::uint32_t>(
          std::lower_bound(tuples.begin(), tuples.end(), probe) - tuples.begin());
    };
    if (j < P)
      for (std::uint32_t i = 0; i < lat.count(j); ++i) {
        std::uint32_t s = find_sub(lat.tuple(j, i).first(d - 1));
        if (table.value[j][i] > vals[j][s]) {
          vals[j][s] = table.value[j][i];
          wits[j][s] = table.witness[j][i];
        }
      }
    if (j > 0)
      for (std::uint32_t i = 0; i < lat.count(j - 1); ++i) {
        std::uint32_t s = find_sub(lat.tuple(j - 1, i).subspan(1));
        if (table.value[j - 1][i] > vals[j][s]) {
          vals[j][s] = table.value[j - 1][i];
          wits[j][s] = table.witness[j - 1][i];
        }
      }
    auto& dst = flat[j];
    dst.reserve(tuples.size() * (d - 1));
    for (const auto& g : tuples) dst.insert(dst.end(), g.begin(), g.end());
  }

  SparseLattice sub = SparseLattice::from_survivors(lat.length(), lat.num_labels(),
                                                    d - 1, std::move(flat));
  MaxMarginalTable out;
  out.anchors = Psub;
  out.order = d - 1;
  out.value = std::move(vals);
  out.witness = std::move(wits);
  out.global_max = table.global_max;
  out.global_argmax = table.global_argmax;
  return {std::move(sub), std::move(out)};
}

}  // namespace cascade
