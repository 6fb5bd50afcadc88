// Feature templates, sparse feature vectors, and linear scoring models.
//
// A LinearModel is a dense weight vector plus an ordered list of feature
// templates.  Templates hash raw observation keys and small state tuples into
// the weight dimension (see hashing.hpp); collisions are allowed and merge
// features.  Scores decompose over cliques: an order-d chain model scores
// every n-gram of sizes 1..d+1 in the output, where size-1 cliques fire the
// unary emission templates against the input tokens and size-(j+1) cliques
// fire the order-j transition templates against the states alone.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/hashing.hpp"

namespace cascade {

/// A label id; always < the model's num_labels.
using State = std::uint16_t;

/// A complete labeling, one state per input position.
using Output = std::vector<State>;

/// The raw observation keys carried by one input position.
using Token = std::vector<std::string>;

/// A sequence input: per-position observation keys.
struct SequenceInput {
  std::vector<Token> tokens;
  std::uint32_t length() const { return static_cast<std::uint32_t>(tokens.size()); }
};

/// One labeled sequence.
struct SequenceExample {
  SequenceInput input;
  Output truth;
};

/// A labeled dataset with a fixed label alphabet of size num_labels.
struct SequenceDataset {
  std::uint32_t num_labels = 0;
  std::vector<SequenceExample> examples;
};

/// A contiguous clique of states: `position` is the index of the first
/// covered input position, `states` holds one state per covered position.
struct CliqueAssignment {
  std::uint32_t position = 0;
  std::vector<State> states;
};

/// Sparse feature vector: indices strictly increasing, no zero values.
struct FeatureVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t size() const { return index.size(); }

  /// Dot product against a dense weight vector.
  double dot(std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < index.size(); ++i) s += w[index[i]] * value[i];
    return s;
  }

  /// Builds a canonical vector from unsorted (index, value) pairs:
  /// sorts, merges duplicate indices by summing, drops exact zeros.
  static FeatureVector from_pairs(std::vector<std::pair<std::uint32_t, double>> pairs);
};

enum class TemplateKind : std::uint8_t {
  UnaryEmission = 0,   // (observation key, state) on size-1 chain cliques
  NgramTransition = 1, // (state tuple) on size-(order+1) chain cliques
  GridUnary = 2,       // (observation key, state) on grid nodes
  GridPairwise = 3,    // (orientation, state pair) on grid edges
};

/// One feature template.  `id` feeds the hash so identically shaped templates
/// can coexist; `ngram_order` is the transition order for NgramTransition
/// (a template of order j fires on cliques of j+1 states) and 0 otherwise.
struct FeatureTemplate {
  TemplateKind kind = TemplateKind::UnaryEmission;
  std::uint32_t ngram_order = 0;
  std::uint32_t id = 0;
};

/// Dense weights over a hashed feature space, plus the templates that
/// define how inputs and outputs map into that space.
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::uint32_t dimension, std::uint32_t num_labels,
              std::vector<FeatureTemplate> templates);

  /// Standard chain model: one unary emission template plus one transition
  /// template per order 1..order.
  static LinearModel chain(std::uint32_t dimension, std::uint32_t num_labels,
                           std::uint32_t order);

  /// Standard grid model: one grid-unary template plus one grid-pairwise
  /// template (shared across orientations via the hash).
  static LinearModel grid(std::uint32_t dimension, std::uint32_t num_labels);

  std::uint32_t dimension() const { return dimension_; }
  std::uint32_t num_labels() const { return num_labels_; }
  /// Highest transition order among the templates (0 if unary-only).
  std::uint32_t order() const { return order_; }
  const std::vector<FeatureTemplate>& templates() const { return templates_; }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Hashed index of (template, observation key, state).
  std::uint32_t emission_index(const FeatureTemplate& t, std::string_view key,
                               State state) const {
    std::uint64_t h = hash_combine(kTemplateSeed + t.id, fnv1a64(key));
    return fold_index(hash_combine(h, state + 1), dimension_);
  }

  /// Hashed index of (template, state tuple).  Position-independent.
  std::uint32_t transition_index(const FeatureTemplate& t,
                                 std::span<const State> states) const {
    std::uint64_t h = mix64(kTemplateSeed + t.id);
    for (State s : states) h = hash_combine(h, s + 1);
    return fold_index(h, dimension_);
  }

  /// Hashed index of (template, orientation, state pair) for grid edges.
  std::uint32_t grid_pair_index(const FeatureTemplate& t, std::uint32_t orientation,
                                State a, State b) const {
    std::uint64_t h = mix64(kTemplateSeed + t.id);
    h = hash_combine(h, orientation + 1);
    h = hash_combine(h, a + 1);
    return fold_index(hash_combine(h, b + 1), dimension_);
  }

 private:
  static constexpr std::uint64_t kTemplateSeed = 0x5ca5cade00000000ull;

  std::uint32_t dimension_ = 0;
  std::uint32_t num_labels_ = 0;
  std::uint32_t order_ = 0;
  std::vector<FeatureTemplate> templates_;
  std::vector<double> weights_;
};

/// Features of one clique under the model's templates.  Size-1 cliques fire
/// unary emission templates; size-(j+1) cliques fire order-j transition
/// templates.  States must be < num_labels and the clique must lie inside
/// the input (ShapeError otherwise).
FeatureVector featurize_clique(const LinearModel& model, const SequenceInput& input,
                               const CliqueAssignment& clique);

/// Dot product of the clique's features with the weights, computed without
/// materializing the feature vector.  Exactly equals
/// featurize_clique(...).dot(weights) because collisions merge by summation
/// in index order on both paths.
double score_clique(const LinearModel& model, const SequenceInput& input,
                    const CliqueAssignment& clique);

/// Total score of a complete output: the sum of score_clique over all cliques
/// induced by the model order, accumulated in the canonical clique order
/// (position of the clique's last state ascending, clique size ascending).
/// The summation order is fixed so that re-scoring is bit-reproducible.
/// Throws ShapeError if output length != input length.
double score_output(const LinearModel& model, const SequenceInput& input,
                    const Output& output);

/// Feature vector of a complete output (sum of clique features, canonical).
FeatureVector featurize_output(const LinearModel& model, const SequenceInput& input,
                               const Output& output);

/// Enumerates the cliques of a length-`length` output under an order-`order`
/// model in the canonical order used by score_output.  Calls
/// fn(position_of_first_state, size) for each clique.
template <class Fn>
void for_each_clique(std::uint32_t order, std::uint32_t length, Fn&& fn) {
  for (std::uint32_t t = 0; t < length; ++t) {
    std::uint32_t max_size = std::min(order + 1, t + 1);
    for (std::uint32_t s = 1; s <= max_size; ++s) fn(t - s + 1, s);
  }
}

}  // namespace cascade
