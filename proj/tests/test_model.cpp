// Feature templates, hashing, clique scoring, and canonical output folds.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cascade/model.hpp"
#include "cascade/rng.hpp"
#include "oracles.hpp"

using namespace cascade;

TEST_CASE("from_pairs sorts, merges duplicates, and drops exact zeros") {
  FeatureVector f = FeatureVector::from_pairs({{7, 1.0}, {3, 2.0}, {7, 0.5}, {1, 0.0}});
  REQUIRE(f.size() == 2);
  CHECK(f.index[0] == 3);
  CHECK(f.index[1] == 7);
  CHECK(f.value[0] == 2.0);
  CHECK(f.value[1] == 1.5);

  // A duplicate pair that cancels to zero disappears entirely.
  FeatureVector g = FeatureVector::from_pairs({{5, 1.0}, {5, -1.0}});
  CHECK(g.size() == 0);
}

TEST_CASE("chain model advertises its templates and order") {
  const LinearModel m = LinearModel::chain(256, 4, 3);
  CHECK(m.order() == 3);
  CHECK(m.num_labels() == 4);
  CHECK(m.dimension() == 256);
  // One unary emission template, one transition template per order 1..3.
  std::size_t unary = 0, transitions = 0;
  for (const FeatureTemplate& t : m.templates()) {
    if (t.kind == TemplateKind::UnaryEmission) ++unary;
    if (t.kind == TemplateKind::NgramTransition) ++transitions;
  }
  CHECK(unary == 1);
  CHECK(transitions == 3);

  const LinearModel g = LinearModel::grid(128, 5);
  CHECK(g.order() == 0);
  CHECK(g.num_labels() == 5);
}

TEST_CASE("model construction rejects degenerate shapes") {
  CHECK_THROWS_AS(LinearModel::chain(0, 3, 1), ConfigError);
  CHECK_THROWS_AS(LinearModel::chain(64, 0, 1), ConfigError);
  CHECK_THROWS_AS(
      LinearModel(64, 3, {FeatureTemplate{TemplateKind::NgramTransition, 0, 0}}),
      ConfigError);
  CHECK_THROWS_AS(
      LinearModel(64, 3, {FeatureTemplate{TemplateKind::UnaryEmission, 2, 0}}),
      ConfigError);
}

TEST_CASE("hashed indices stay inside the dimension and depend only on content") {
  const LinearModel a = LinearModel::chain(97, 6, 2);
  const LinearModel b = LinearModel::chain(97, 6, 2);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const State s = static_cast<State>(rng.uniform_int(6));
    const std::string key = "k" + std::to_string(rng.uniform_int(50));
    for (const FeatureTemplate& t : a.templates()) {
      if (t.kind == TemplateKind::UnaryEmission) {
        const std::uint32_t ia = a.emission_index(t, key, s);
        CHECK(ia < a.dimension());
        CHECK(ia == b.emission_index(b.templates()[0], key, s));
      }
    }
  }
}

TEST_CASE("score_clique equals the explicit feature dot product") {
  LinearModel m = LinearModel::chain(512, 4, 2);
  Rng rng(11);
  oracle::randomize(m, rng, -2.0, 2.0);
  const SequenceInput input = oracle::random_input(rng, 6);
  for (int i = 0; i < 100; ++i) {
    CliqueAssignment c;
    const std::uint32_t size = 1 + static_cast<std::uint32_t>(rng.uniform_int(3));
    c.position = static_cast<std::uint32_t>(rng.uniform_int(6 - size + 1));
    for (std::uint32_t j = 0; j < size; ++j)
      c.states.push_back(static_cast<State>(rng.uniform_int(4)));
    const FeatureVector f = featurize_clique(m, input, c);
    CHECK(score_clique(m, input, c) == f.dot(m.weights()));
    // Canonical: indices strictly increasing, no zeros.
    for (std::size_t k = 1; k < f.size(); ++k) CHECK(f.index[k - 1] < f.index[k]);
  }
}

TEST_CASE("score_output is the canonical clique fold, bit-for-bit") {
  Rng rng(29);
  for (std::uint32_t order = 1; order <= 3; ++order) {
    LinearModel m = LinearModel::chain(1u << 10, 3, order);
    oracle::randomize(m, rng, -5.0, 5.0);
    for (int i = 0; i < 50; ++i) {
      const std::uint32_t length = order + 1 + static_cast<std::uint32_t>(rng.uniform_int(4));
      const SequenceInput input = oracle::random_input(rng, length);
      const Output y = oracle::random_output(rng, length, 3);
      CHECK(score_output(m, input, y) == oracle::score(m, input, y));
    }
  }
}

TEST_CASE("featurize_output matches score_output up to summation order") {
  LinearModel m = LinearModel::chain(1u << 9, 4, 2);
  Rng rng(31);
  oracle::randomize(m, rng, -3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const std::uint32_t length = 3 + static_cast<std::uint32_t>(rng.uniform_int(5));
    const SequenceInput input = oracle::random_input(rng, length);
    const Output y = oracle::random_output(rng, length, 4);
    const double via_features = featurize_output(m, input, y).dot(m.weights());
    CHECK(score_output(m, input, y) == doctest::Approx(via_features).epsilon(1e-12));
  }
}

TEST_CASE("scoring rejects malformed cliques and outputs") {
  const LinearModel m = LinearModel::chain(64, 3, 1);
  Rng rng(1);
  const SequenceInput input = oracle::random_input(rng, 3);
  CHECK_THROWS_AS(score_clique(m, input, CliqueAssignment{2, {0, 0}}), ShapeError);
  CHECK_THROWS_AS(score_clique(m, input, CliqueAssignment{0, {3}}), ShapeError);
  CHECK_THROWS_AS(score_clique(m, input, CliqueAssignment{0, {}}), ShapeError);
  CHECK_THROWS_AS(score_output(m, input, Output{0, 0}), ShapeError);
}
