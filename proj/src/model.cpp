// Implementation of feature templates and linear scoring (see model.hpp).

#include "cascade/model.hpp"

#include <algorithm>
#include <utility>

namespace cascade {

FeatureVector FeatureVector::from_pairs(std::vector<std::pair<std::uint32_t, double>> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  FeatureVector out;
  out.index.reserve(pairs.size());
  out.value.reserve(pairs.size());
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::uint32_t idx = pairs[i].first;
    double v = 0.0;
    while (i < pairs.size() && pairs[i].first == idx) {
      v += pairs[i].second;
      ++i;
    }
    if (v != 0.0) {
      out.index.push_back(idx);
      out.value.push_back(v);
    }
  }
  return out;
}

LinearModel::LinearModel(std::uint32_t dimension, std::uint32_t num_labels,
                         std::vector<FeatureTemplate> templates)
    : dimension_(dimension), num_labels_(num_labels), templates_(std::move(templates)) {
  if (dimension == 0) throw ConfigError("model dimension must be positive");
  if (num_labels == 0) throw ConfigError("model must have at least one label");
  for (const FeatureTemplate& t : templates_) {
    if (t.kind == TemplateKind::NgramTransition) {
      if (t.ngram_order == 0)
        throw ConfigError("transition template must have order >= 1");
      order_ = std::max(order_, t.ngram_order);
    } else if (t.ngram_order != 0) {
      throw ConfigError("non-transition template must have ngram_order 0");
    }
  }
  weights_.assign(dimension_, 0.0);
}

LinearModel LinearModel::chain(std::uint32_t dimension, std::uint32_t num_labels,
                               std::uint32_t order) {
  std::vector<FeatureTemplate> ts;
  ts.push_back({TemplateKind::UnaryEmission, 0, 0});
  for (std::uint32_t j = 1; j <= order; ++j)
    ts.push_back({TemplateKind::NgramTransition, j, j});
  return LinearModel(dimension, num_labels, std::move(ts));
}

LinearModel LinearModel::grid(std::uint32_t dimension, std::uint32_t num_labels) {
  std::vector<FeatureTemplate> ts;
  ts.push_back({TemplateKind::GridUnary, 0, 0});
  ts.push_back({TemplateKind::GridPairwise, 0, 1});
  return LinearModel(dimension, num_labels, std::move(ts));
}

namespace {

void check_clique(const LinearModel& model, const SequenceInput& input,
                  const CliqueAssignment& clique) {
  if (clique.states.empty()) throw ShapeError("clique must cover at least one position");
  if (clique.position + clique.states.size() > input.tokens.size())
    throw ShapeError("clique extends past the end of the input");
  for (State s : clique.states)
    if (s >= model.num_labels()) throw ShapeError("clique state exceeds num_labels");
}

// Applies fn(index, 1.0) for every feature the clique activates, in template
// order then key order.  This single enumeration backs both featurize_clique
// and score_clique so the two agree feature-for-feature.
template <class Fn>
void enumerate_clique_features(const LinearModel& model, const SequenceInput& input,
                               const CliqueAssignment& clique, Fn&& fn) {
  const std::size_t size = clique.states.size();
  for (const FeatureTemplate& t : model.templates()) {
    switch (t.kind) {
      case TemplateKind::UnaryEmission:
        if (size == 1) {
          for (const std::string& key : input.tokens[clique.position])
            fn(model.emission_index(t, key, clique.states[0]));
        }
        break;
      case TemplateKind::NgramTransition:
        if (size == t.ngram_order + 1)
          fn(model.transition_index(t, clique.states));
        break;
      case TemplateKind::GridUnary:
      case TemplateKind::GridPairwise:
        // Grid templates fire through the grid featurizer (ensemble module),
        // never on chain cliques.
        break;
    }
  }
}

}  // namespace

FeatureVector featurize_clique(const LinearModel& model, const SequenceInput& input,
                               const CliqueAssignment& clique) {
  check_clique(model, input, clique);
  std::vector<std::pair<std::uint32_t, double>> pairs;
  enumerate_clique_features(model, input, clique,
                            [&](std::uint32_t idx) { pairs.emplace_back(idx, 1.0); });
  return FeatureVector::from_pairs(std::move(pairs));
}

double score_clique(const LinearModel& model, const SequenceInput& input,
                    const CliqueAssignment& clique) {
  check_clique(model, input, clique);
  const std::vector<double>& w = model.weights();
  double s = 0.0;
  enumerate_clique_features(model, input, clique,
                            [&](std::uint32_t idx) { s += w[idx]; });
  return s;
}

double score_output(const LinearModel& model, const SequenceInput& input,
                    const Output& output) {
  if (output.size() != input.tokens.size())
    throw ShapeError("output length does not match input length");
  double total = 0.0;
  CliqueAssignment clique;
  for_each_clique(model.order(), input.length(), [&](std::uint32_t pos, std::uint32_t size) {
    clique.position = pos;
    clique.states.assign(output.begin() + pos, output.begin() + pos + size);
    total += score_clique(model, input, clique);
  });
  return total;
}

FeatureVector featurize_output(const LinearModel& model, const SequenceInput& input,
                               const Output& output) {
  if (output.size() != input.tokens.size())
    throw ShapeError("output length does not match input length");
  std::vector<std::pair<std::uint32_t, double>> pairs;
  CliqueAssignment clique;
  for_each_clique(model.order(), input.length(), [&](std::uint32_t pos, std::uint32_t size) {
    clique.position = pos;
    clique.states.assign(output.begin() + pos, output.begin() + pos + size);
    check_clique(model, input, clique);
    enumerate_clique_features(model, input, clique,
                              [&](std::uint32_t idx) { pairs.emplace_back(idx, 1.0); });
  });
  return FeatureVector::from_pairs(std::move(pairs));
}

}  // namespace cascade
