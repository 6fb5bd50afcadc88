// Sparse lattices over n-gram state assignments.
//
// A SparseLattice of order d over a length-L output holds, for each of the
// L-d+1 anchor positions, the surviving d-gram assignments (sorted
// lexicographically) and the materialized transitions between adjacent
// anchors.  Two assignments are transition-compatible when the left one's
// last d-1 states equal the right one's first d-1 states, so a path through
// the lattice spells out exactly one complete output.  Positions are never
// empty: an operation that would empty one throws BrokenLatticeError instead.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/model.hpp"

namespace cascade {

/// Pair of assignment indices (left anchor, right anchor) for one transition.
using Transition = std::pair<std::uint32_t, std::uint32_t>;

/// Coarse-to-fine state refinement map: each coarse state owns a disjoint,
/// covering set of fine states.
struct StateHierarchy {
  std::uint32_t coarse_labels = 0;
  std::uint32_t fine_labels = 0;
  std::vector<std::vector<State>> children;  // indexed by coarse state

  /// Splits `coarse` states into `branching` fine states each, in order.
  static StateHierarchy even_split(std::uint32_t coarse, std::uint32_t branching);

  /// The coarse parent of a fine state (ConfigError if uncovered).
  State parent(State fine) const;

  /// ConfigError unless children are disjoint and cover [0, fine_labels).
  void validate() const;
};

class SparseLattice {
 public:
  static constexpr std::uint32_t npos = 0xffffffffu;

  /// The full output space: every d-gram at every anchor, every compatible
  /// transition.  Throws ShapeError if order<1 or order>length, ConfigError
  /// if the full space would exceed the materialization guard.
  static SparseLattice full(std::uint32_t length, std::uint32_t num_labels,
                            std::uint32_t order);

  /// Builds a lattice from per-anchor assignment lists (flattened tuples,
  /// lexicographically sorted, unique).  Transitions are rebuilt as all
  /// overlap-compatible pairs.  Throws BrokenLatticeError on an empty anchor,
  /// DataError on unsorted/duplicate/out-of-range tuples.
  static SparseLattice from_survivors(std::uint32_t length, std::uint32_t num_labels,
                                      std::uint32_t order,
                                      std::vector<std::vector<State>> flat_states);

  std::uint32_t length() const { return length_; }
  std::uint32_t order() const { return order_; }
  std::uint32_t num_labels() const { return num_labels_; }
  /// Number of anchor positions, length - order + 1.
  std::uint32_t anchors() const { return static_cast<std::uint32_t>(states_.size()); }

  /// Number of surviving assignments at an anchor (always >= 1).
  std::uint32_t count(std::uint32_t anchor) const {
    return static_cast<std::uint32_t>(states_[anchor].size() / order_);
  }

  /// The state tuple of assignment `idx` at `anchor`.
  std::span<const State> tuple(std::uint32_t anchor, std::uint32_t idx) const {
    return {states_[anchor].data() + static_cast<std::size_t>(idx) * order_, order_};
  }

  /// Transitions between anchors `pair` and `pair`+1, sorted by (left, right).
  const std::vector<Transition>& transitions(std::uint32_t pair) const {
    return transitions_[pair];
  }

  /// Index of a tuple at an anchor, or npos if absent.
  std::uint32_t find(std::uint32_t anchor, std::span<const State> tuple) const;

  /// True when every assignment and every adjacent transition of the output
  /// is present in the lattice.  Output length must match (ShapeError).
  bool contains(const Output& output) const;

  /// Surviving assignments as a fraction of the full order-d space,
  /// sum_c |V_c| / (anchors * num_labels^order).
  double density() const;

  /// Total number of surviving assignments, sum_c |V_c|.
  std::uint64_t total_assignments() const;

  /// Total number of materialized transitions.
  std::uint64_t total_transitions() const;

 private:
  SparseLattice() = default;
  void rebuild_transitions();

  std::uint32_t length_ = 0;
  std::uint32_t order_ = 0;
  std::uint32_t num_labels_ = 0;
  std::vector<std::vector<State>> states_;        // per anchor, flattened tuples
  std::vector<std::vector<Transition>> transitions_;  // per adjacent anchor pair

  friend SparseLattice filter_assignments(const SparseLattice&,
                                          const std::vector<std::vector<char>>&);
};

/// Lifts a lattice from order d to order d+1: a (d+1)-gram is valid exactly
/// when both of its constituent d-grams survive (equivalently, when it is a
/// transition of the input lattice).  Throws BrokenLatticeError if an anchor
/// of the result would be empty, ShapeError if order+1 > length.
SparseLattice expand(const SparseLattice& lattice);

/// Replaces every surviving coarse state with its fine children under the
/// hierarchy.  Order-1 lattices only (ConfigError otherwise, or when the
/// hierarchy does not cover the lattice's label alphabet).
SparseLattice refine(const SparseLattice& lattice, const StateHierarchy& hierarchy);

/// Internal helper shared by the threshold module: keeps the assignments
/// flagged true, rebuilds transitions by restriction, and throws
/// BrokenLatticeError if an anchor empties.
SparseLattice filter_assignments(const SparseLattice& lattice,
                                 const std::vector<std::vector<char>>& keep);

}  // namespace cascade
