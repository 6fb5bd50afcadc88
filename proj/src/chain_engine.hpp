// Shared dynamic-programming engine for chain inference (library-internal).
//
// Scores decompose into per-anchor "blocks": the cliques whose last state
// falls at the anchor's newest position.  Block clique scores are stored
// individually (sizes ascending, matching score_output's canonical order) so
// that any path's total can be reproduced as the exact left-to-right fold of
// its block entries — this is what makes witness re-scoring bit-exact without
// re-hashing features.  The order-(d+1) spanning clique of a transition is
// the last entry of its position's block and is stored per transition.
//
// Forward values F hold the exact fold along the chosen backpointer path;
// backward values B are plain block-sum messages used only for argmax
// decisions and greedy reconstruction.

#pragma once

#include <cstdint>
#include <vector>

#include "cascade/inference.hpp"
#include "cascade/lattice.hpp"
#include "cascade/model.hpp"

namespace cascade::detail {

class ChainEngine {
 public:
  static constexpr std::uint32_t npos = SparseLattice::npos;

  ChainEngine(const LinearModel& model, const SequenceInput& input,
              const SparseLattice& lattice);

  const SparseLattice& lattice() const { return lat_; }

  /// Max-marginal table with witnesses (see inference.hpp).
  MaxMarginalTable max_marginal_table() const;

  /// Max-marginal values only, skipping witness materialization (the hot
  /// path of training).  Fills value[anchor][idx] and returns the global
  /// max; numbers are identical to max_marginal_table().
  double max_marginal_values(std::vector<std::vector<double>>& value) const;

  /// Lexicographically smallest MAP output and its exact score.
  std::pair<Output, double> decode() const;

  /// Sum-product posteriors (node and edge).
  SumProductResult sum_product() const;

  /// Adds `weight` times the summed features of all witnesses to `delta`
  /// (a dense dimension-sized buffer), recording touched indices.  Exactly
  /// equals accumulating featurize_output over every witness in the table.
  void add_witness_features(double weight, std::vector<double>& delta,
                            std::vector<std::uint32_t>& touched) const;

  /// Adds `weight` times the expected features under the Gibbs posterior.
  void add_expected_features(const SumProductResult& sp, double weight,
                             std::vector<double>& delta,
                             std::vector<std::uint32_t>& touched) const;

 private:
  // Per-assignment in-block clique scores, flattened; block_begin_ indexes by
  // anchor.  Anchor 0's block covers every clique inside the first window.
  double block_entry(std::uint32_t anchor, std::uint32_t idx, std::uint32_t k) const {
    return block_[block_begin_[anchor] + static_cast<std::size_t>(idx) * block_width(anchor) + k];
  }
  std::uint32_t block_width(std::uint32_t anchor) const {
    return anchor == 0 ? width0_ : width_;
  }

  // Exact fold of one path given its per-anchor assignment indices.
  double fold_path(const std::vector<std::uint32_t>& idxs) const;
  Output assemble(const std::vector<std::uint32_t>& idxs) const;

  // Witness of (anchor, idx) as assignment indices; false if unreachable.
  bool witness_indices(std::uint32_t anchor, std::uint32_t idx,
                       std::vector<std::uint32_t>& idxs) const;

  // Enumerates the hashed feature indices of a block (all cliques the block
  // owns except transition-spanning ones).
  template <class Fn>
  void enumerate_block_features(std::uint32_t anchor, std::uint32_t idx, Fn&& fn) const;

  // desc/anc pointer-tree sizes for witness multiplicity accumulation.
  void pointer_tree_sizes(std::vector<std::vector<std::uint64_t>>& desc,
                          std::vector<std::vector<std::uint64_t>>& anc) const;

  const LinearModel& model_;
  const SequenceInput& input_;
  const SparseLattice& lat_;

  std::uint32_t P_;            // anchor count
  std::uint32_t d_;            // lattice order
  std::uint32_t dm_;           // model order (<= d_)
  bool spanning_;              // dm_ == d_: transitions carry a (d+1)-clique
  std::uint32_t width0_ = 0;   // block entries per anchor-0 assignment
  std::uint32_t width_ = 0;    // block entries per assignment, anchors >= 1

  std::vector<std::size_t> block_begin_;       // per anchor, offset into block_
  std::vector<double> block_;                  // flattened block clique scores
  std::vector<std::vector<double>> node_sum_;  // per (anchor, idx): sum of its block
  std::vector<std::vector<double>> trans_;     // per (pair, transition): spanning score

  // CSR adjacency derived from the lattice's transition lists.
  std::vector<std::vector<std::uint32_t>> succ_off_, succ_tr_;  // per anchor as left side
  std::vector<std::vector<std::uint32_t>> pred_off_, pred_tr_;  // per anchor as right side

  std::vector<std::vector<double>> F_;             // exact fold along bp path
  std::vector<std::vector<double>> B_;             // block-sum suffix messages
  std::vector<std::vector<std::uint32_t>> bp_;     // predecessor assignment index
  std::vector<std::vector<std::uint32_t>> fp_;     // successor assignment index
};

}  // namespace cascade::detail
