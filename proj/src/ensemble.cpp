// Comb decomposition, tree max-sum, joint filtering, and grid cascade
// training (see ensemble.hpp).

#include "cascade/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "cascade/rng.hpp"

namespace cascade {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in [0,1), got " + std::to_string(alpha));
}

// Surviving state lists must be aligned with the grid, sorted, unique,
// in-range, and nonempty.
void check_states(const GridStates& states, std::uint32_t nodes, std::uint32_t num_labels) {
  if (states.size() != nodes)
    throw ShapeError("state lists cover " + std::to_string(states.size()) + " nodes, grid has " +
                     std::to_string(nodes));
  for (std::uint32_t v = 0; v < nodes; ++v) {
    if (states[v].empty())
      throw BrokenLatticeError("node " + std::to_string(v) + " has no surviving states", v);
    for (std::size_t i = 0; i < states[v].size(); ++i) {
      if (states[v][i] >= num_labels)
        throw ShapeError("state " + std::to_string(states[v][i]) + " at node " +
                         std::to_string(v) + " outside alphabet of size " +
                         std::to_string(num_labels));
      if (i > 0 && !(states[v][i - 1] < states[v][i]))
        throw DataError("state list at node " + std::to_string(v) + " is not sorted unique");
    }
  }
}

void check_grid_model(const GridModel& model, const CombDecomposition& combs) {
  if (model.rows != combs.rows || model.cols != combs.cols)
    throw ShapeError("grid model shape does not match the decomposition");
  if (model.num_labels == 0) throw ShapeError("grid model has an empty alphabet");
  const std::uint32_t nodes = combs.nodes();
  if (model.unary.size() != nodes)
    throw ShapeError("unary table covers " + std::to_string(model.unary.size()) +
                     " nodes, grid has " + std::to_string(nodes));
  for (const auto& u : model.unary)
    if (u.size() != model.num_labels) throw ShapeError("unary table row has wrong arity");
  if (model.pairwise.size() != combs.edge_list.size())
    throw ShapeError("pairwise table covers " + std::to_string(model.pairwise.size()) +
                     " edges, grid has " + std::to_string(combs.edge_list.size()));
  for (const auto& p : model.pairwise)
    if (p.size() != static_cast<std::size_t>(model.num_labels) * model.num_labels)
      throw ShapeError("pairwise table row has wrong arity");
}

void check_output(const Output& output, std::uint32_t nodes, std::uint32_t num_labels) {
  if (output.size() != nodes)
    throw ShapeError("output length " + std::to_string(output.size()) + " does not match " +
                     std::to_string(nodes) + " grid nodes");
  for (State s : output)
    if (s >= num_labels)
      throw ShapeError("output state " + std::to_string(s) + " outside alphabet of size " +
                       std::to_string(num_labels));
}

bool state_in(const std::vector<State>& sorted, State s) {
  return std::binary_search(sorted.begin(), sorted.end(), s);
}

bool states_contain(const GridStates& states, const Output& output) {
  for (std::uint32_t v = 0; v < states.size(); ++v)
    if (!state_in(states[v], output[v])) return false;
  return true;
}

void add_features(LinearModel& model, const FeatureVector& f, double weight) {
  auto& w = model.weights();
  for (std::size_t i = 0; i < f.index.size(); ++i) w[f.index[i]] += weight * f.value[i];
}

// One sub-model edge with its coverage-weighted score table restricted to
// the surviving states: score[ia * |S_b| + ib].
struct TreeEdge {
  std::uint32_t id = 0;  // canonical edge id
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::vector<double> score;
};

// Tree max-sum over restricted node states.  Messages are plain sums used
// only to pick argmax witnesses; reported marginals are canonical re-folds
// of the witness (all node terms in node order, then all tree-edge terms in
// canonical edge order), which makes them bit-comparable with the
// corresponding score function.
class TreeEngine {
 public:
  static constexpr std::uint32_t npos = 0xffffffffu;

  TreeEngine(const GridStates* states, std::vector<std::vector<double>> unary,
             std::vector<TreeEdge> edges)
      : states_(states), U_(std::move(unary)), edges_(std::move(edges)) {
    const std::uint32_t N = static_cast<std::uint32_t>(states_->size());

    // Adjacency (neighbor, edge index), neighbors ascending.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj(N);
    for (std::uint32_t k = 0; k < edges_.size(); ++k) {
      adj[edges_[k].a].push_back({edges_[k].b, k});
      adj[edges_[k].b].push_back({edges_[k].a, k});
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    parent_.assign(N, npos);
    parent_edge_.assign(N, npos);
    children_.resize(N);
    bfs_.reserve(N);
    std::vector<char> seen(N, 0);
    bfs_.push_back(0);
    seen[0] = 1;
    for (std::size_t head = 0; head < bfs_.size(); ++head) {
      std::uint32_t v = bfs_[head];
      for (auto [u, k] : adj[v]) {
        if (seen[u]) continue;
        seen[u] = 1;
        parent_[u] = v;
        parent_edge_[u] = k;
        children_[v].push_back(u);
        bfs_.push_back(u);
      }
    }
    if (bfs_.size() != N) throw ShapeError("sub-model edges do not span the grid");

    // Upward: messages to parents, argmax pointers per parent state.
    up_.resize(N);
    cmsg_.resize(N);
    wit_up_.resize(N);
    for (std::size_t h = N; h-- > 0;) {
      const std::uint32_t v = bfs_[h];
      up_[v] = U_[v];
      for (std::uint32_t c : children_[v])
        for (std::size_t i = 0; i < up_[v].size(); ++i) up_[v][i] += cmsg_[c][i];
      if (parent_[v] == npos) continue;
      const std::uint32_t u = parent_[v];
      const std::size_t nu = (*states_)[u].size(), nv = (*states_)[v].size();
      cmsg_[v].assign(nu, kNegInf);
      wit_up_[v].assign(nu, 0);
      const TreeEdge& e = edges_[parent_edge_[v]];
      for (std::size_t j = 0; j < nu; ++j) {
        double best = kNegInf;
        std::uint32_t bi = 0;
        for (std::size_t i = 0; i < nv; ++i) {
          double cand = edge_term(e, u, j, i) + up_[v][i];
          if (cand > best) {
            best = cand;
            bi = static_cast<std::uint32_t>(i);
          }
        }
        cmsg_[v][j] = best;
        wit_up_[v][j] = bi;
      }
    }

    // Downward: parent-side messages, argmax parent state per own state.
    down_.resize(N);
    wit_down_.resize(N);
    down_[0].assign((*states_)[0].size(), 0.0);
    for (std::uint32_t v : bfs_) {
      for (std::uint32_t c : children_[v]) {
        const std::size_t nc = (*states_)[c].size(), nv = (*states_)[v].size();
        down_[c].assign(nc, kNegInf);
        wit_down_[c].assign(nc, 0);
        const TreeEdge& e = edges_[parent_edge_[c]];
        for (std::size_t i = 0; i < nc; ++i) {
          double best = kNegInf;
          std::uint32_t bj = 0;
          for (std::size_t j = 0; j < nv; ++j) {
            double cand = edge_term(e, v, j, i) + up_[v][j] + down_[v][j] - cmsg_[c][j];
            if (cand > best) {
              best = cand;
              bj = static_cast<std::uint32_t>(j);
            }
          }
          down_[c][i] = best;
          wit_down_[c][i] = bj;
        }
      }
    }
  }

  /// Witness state indices (one per node) of (node, idx).
  void witness(std::uint32_t node, std::uint32_t idx, std::vector<std::uint32_t>& ai) const {
    ai.assign(states_->size(), 0);
    ai[node] = idx;
    fill_subtree(node, npos, ai);
    for (std::uint32_t cur = node; parent_[cur] != npos;) {
      const std::uint32_t u = parent_[cur];
      ai[u] = wit_down_[cur][ai[cur]];
      fill_subtree(u, cur, ai);
      cur = u;
    }
  }

  /// Canonical re-fold of a complete assignment: node terms ascending, then
  /// tree-edge terms in canonical edge order.
  double refold(const std::vector<std::uint32_t>& ai) const {
    double s = 0.0;
    for (std::size_t v = 0; v < U_.size(); ++v) s += U_[v][ai[v]];
    for (const TreeEdge& e : edges_)
      s += e.score[static_cast<std::size_t>(ai[e.a]) * (*states_)[e.b].size() + ai[e.b]];
    return s;
  }

  /// Fills value[node][idx] with witness re-folds; returns the global max
  /// (first attaining (node, idx) in scan order recorded for argmax()).
  double marginals(std::vector<std::vector<double>>& value) {
    const std::uint32_t N = static_cast<std::uint32_t>(states_->size());
    value.assign(N, {});
    double gmax = kNegInf;
    std::vector<std::uint32_t> ai;
    for (std::uint32_t v = 0; v < N; ++v) {
      value[v].assign((*states_)[v].size(), 0.0);
      for (std::uint32_t i = 0; i < (*states_)[v].size(); ++i) {
        witness(v, i, ai);
        const double s = refold(ai);
        value[v][i] = s;
        if (s > gmax) {
          gmax = s;
          argmax_node_ = v;
          argmax_idx_ = i;
        }
      }
    }
    return gmax;
  }

  std::uint32_t argmax_node() const { return argmax_node_; }
  std::uint32_t argmax_idx() const { return argmax_idx_; }

 private:
  // Table entry for endpoint u at state index ju, other endpoint at iv.
  double edge_term(const TreeEdge& e, std::uint32_t u, std::size_t ju, std::size_t iv) const {
    const std::size_t nb = (*states_)[e.b].size();
    return u == e.a ? e.score[ju * nb + iv] : e.score[iv * nb + ju];
  }

  // Sets every strict descendant of `start` from the upward argmax pointers,
  // skipping the child `skip` (and its subtree) when given.
  void fill_subtree(std::uint32_t start, std::uint32_t skip,
                    std::vector<std::uint32_t>& ai) const {
    std::vector<std::uint32_t> stack{start};
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      for (std::uint32_t c : children_[u]) {
        if (u == start && c == skip) continue;
        ai[c] = wit_up_[c][ai[u]];
        stack.push_back(c);
      }
    }
  }

  const GridStates* states_;
  std::vector<std::vector<double>> U_;
  std::vector<TreeEdge> edges_;
  std::vector<std::uint32_t> parent_, parent_edge_, bfs_;
  std::vector<std::vector<std::uint32_t>> children_;
  std::vector<std::vector<double>> up_, cmsg_, down_;
  std::vector<std::vector<std::uint32_t>> wit_up_, wit_down_;
  std::uint32_t argmax_node_ = 0, argmax_idx_ = 0;
};

// Builds one sub-model's coverage-weighted tables from raw potentials.
std::vector<std::vector<double>> unary_tables_raw(const GridModel& model,
                                                  const CombDecomposition& combs,
                                                  const GridStates& states) {
  const double div = static_cast<double>(combs.node_coverage);
  std::vector<std::vector<double>> U(states.size());
  for (std::uint32_t v = 0; v < states.size(); ++v) {
    U[v].resize(states[v].size());
    for (std::size_t i = 0; i < states[v].size(); ++i) {
      const double raw = model.unary[v][states[v][i]];
      if (!std::isfinite(raw))
        throw NumericError("non-finite unary potential at node " + std::to_string(v));
      U[v][i] = raw / div;
    }
  }
  return U;
}

std::vector<TreeEdge> edge_tables_raw(const GridModel& model, const CombDecomposition& combs,
                                      const SubModel& sub, const GridStates& states) {
  std::vector<TreeEdge> out;
  out.reserve(sub.edges.size());
  const std::uint32_t K = model.num_labels;
  for (std::uint32_t e : sub.edges) {
    const GridEdge& ge = combs.edge_list[e];
    const double div = static_cast<double>(combs.edge_coverage[e]);
    const auto& Sa = states[ge.a];
    const auto& Sb = states[ge.b];
    TreeEdge te{e, ge.a, ge.b, std::vector<double>(Sa.size() * Sb.size())};
    for (std::size_t ia = 0; ia < Sa.size(); ++ia)
      for (std::size_t ib = 0; ib < Sb.size(); ++ib) {
        const double raw = model.pairwise[e][static_cast<std::size_t>(Sa[ia]) * K + Sb[ib]];
        if (!std::isfinite(raw))
          throw NumericError("non-finite pairwise potential on edge " + std::to_string(e));
        te.score[ia * Sb.size() + ib] = raw / div;
      }
    out.push_back(std::move(te));
  }
  return out;
}

// Hashed-feature sums of a learned grid model (before coverage division).
double hashed_unary(const LinearModel& m, const Token& token, State s) {
  double u = 0.0;
  for (const FeatureTemplate& tm : m.templates())
    if (tm.kind == TemplateKind::GridUnary)
      for (const std::string& key : token) u += m.weights()[m.emission_index(tm, key, s)];
  return u;
}

double hashed_pair(const LinearModel& m, std::uint32_t orientation, State a, State b) {
  double q = 0.0;
  for (const FeatureTemplate& tm : m.templates())
    if (tm.kind == TemplateKind::GridPairwise)
      q += m.weights()[m.grid_pair_index(tm, orientation, a, b)];
  return q;
}

std::vector<std::vector<double>> unary_tables_learned(const LinearModel& m,
                                                      const CombDecomposition& combs,
                                                      const GridInput& input,
                                                      const GridStates& states) {
  const double div = static_cast<double>(combs.node_coverage);
  std::vector<std::vector<double>> U(states.size());
  for (std::uint32_t v = 0; v < states.size(); ++v) {
    U[v].resize(states[v].size());
    for (std::size_t i = 0; i < states[v].size(); ++i)
      U[v][i] = hashed_unary(m, input.tokens[v], states[v][i]) / div;
  }
  return U;
}

std::vector<TreeEdge> edge_tables_learned(const LinearModel& m, const CombDecomposition& combs,
                                          const SubModel& sub, const GridStates& states) {
  std::vector<TreeEdge> out;
  out.reserve(sub.edges.size());
  for (std::uint32_t e : sub.edges) {
    const GridEdge& ge = combs.edge_list[e];
    const double div = static_cast<double>(combs.edge_coverage[e]);
    const auto& Sa = states[ge.a];
    const auto& Sb = states[ge.b];
    TreeEdge te{e, ge.a, ge.b, std::vector<double>(Sa.size() * Sb.size())};
    for (std::size_t ia = 0; ia < Sa.size(); ++ia)
      for (std::size_t ib = 0; ib < Sb.size(); ++ib)
        te.score[ia * Sb.size() + ib] = hashed_pair(m, ge.orientation, Sa[ia], Sb[ib]) / div;
    out.push_back(std::move(te));
  }
  return out;
}

void check_grid_input(const GridInput& input, const CombDecomposition& combs) {
  if (input.rows != combs.rows || input.cols != combs.cols)
    throw ShapeError("grid input shape does not match the ensemble");
  if (input.nodes() != combs.nodes())
    throw ShapeError("grid input has " + std::to_string(input.nodes()) + " tokens, grid has " +
                     std::to_string(combs.nodes()) + " nodes");
}

void check_ensemble(const GridEnsembleModel& ensemble) {
  if (ensemble.models.size() != ensemble.combs.combs.size())
    throw ShapeError("ensemble model count does not match its decomposition");
  if (ensemble.models.empty()) throw ShapeError("ensemble has no sub-models");
}

}  // namespace

std::vector<GridEdge> grid_edges(std::uint32_t rows, std::uint32_t cols) {
  std::vector<GridEdge> out;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t v = r * cols + c;
      if (c + 1 < cols) out.push_back({v, v + 1, 0});
      if (r + 1 < rows) out.push_back({v, v + cols, 1});
    }
  return out;
}

CombDecomposition comb_decompose(std::uint32_t rows, std::uint32_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("grid dimensions must be positive");
  CombDecomposition d;
  d.rows = rows;
  d.cols = cols;
  d.edge_list = grid_edges(rows, cols);

  if (rows == 1 || cols == 1) {
    // Already a tree: one sub-model holding every edge.
    SubModel all;
    for (std::uint32_t e = 0; e < d.edge_list.size(); ++e) all.edges.push_back(e);
    d.combs.push_back(std::move(all));
  } else {
    // One comb per column spine: every horizontal edge plus that column's
    // vertical edges.  Then one per row spine, symmetrically.
    for (std::uint32_t j = 0; j < cols; ++j) {
      SubModel comb;
      for (std::uint32_t e = 0; e < d.edge_list.size(); ++e) {
        const GridEdge& ge = d.edge_list[e];
        if (ge.orientation == 0 || ge.a % cols == j) comb.edges.push_back(e);
      }
      d.combs.push_back(std::move(comb));
    }
    for (std::uint32_t i = 0; i < rows; ++i) {
      SubModel comb;
      for (std::uint32_t e = 0; e < d.edge_list.size(); ++e) {
        const GridEdge& ge = d.edge_list[e];
        if (ge.orientation == 1 || ge.a / cols == i) comb.edges.push_back(e);
      }
      d.combs.push_back(std::move(comb));
    }
  }

  // Coverage counted empirically from membership.
  d.edge_coverage.assign(d.edge_list.size(), 0);
  for (const SubModel& s : d.combs)
    for (std::uint32_t e : s.edges) ++d.edge_coverage[e];
  d.node_coverage = static_cast<std::uint32_t>(d.combs.size());
  for (std::uint32_t e = 0; e < d.edge_coverage.size(); ++e)
    if (d.edge_coverage[e] == 0)
      throw ShapeError("decomposition left edge " + std::to_string(e) + " uncovered");
  return d;
}

double grid_score(const GridModel& model, const Output& output) {
  const CombDecomposition shape = [&] {
    CombDecomposition d;
    d.rows = model.rows;
    d.cols = model.cols;
    d.edge_list = grid_edges(model.rows, model.cols);
    return d;
  }();
  if (model.unary.size() != shape.nodes() || model.pairwise.size() != shape.edge_list.size())
    throw ShapeError("grid model tables do not match its shape");
  check_output(output, shape.nodes(), model.num_labels);
  double s = 0.0;
  for (std::uint32_t v = 0; v < shape.nodes(); ++v) s += model.unary[v][output[v]];
  const std::uint32_t K = model.num_labels;
  for (std::uint32_t e = 0; e < shape.edge_list.size(); ++e) {
    const GridEdge& ge = shape.edge_list[e];
    s += model.pairwise[e][static_cast<std::size_t>(output[ge.a]) * K + output[ge.b]];
  }
  return s;
}

double comb_score(const GridModel& model, const CombDecomposition& combs, std::uint32_t p,
                  const Output& output) {
  check_grid_model(model, combs);
  check_output(output, combs.nodes(), model.num_labels);
  if (p >= combs.combs.size()) throw ConfigError("sub-model index out of range");
  const double ncov = static_cast<double>(combs.node_coverage);
  double s = 0.0;
  for (std::uint32_t v = 0; v < combs.nodes(); ++v) s += model.unary[v][output[v]] / ncov;
  const std::uint32_t K = model.num_labels;
  for (std::uint32_t e : combs.combs[p].edges) {
    const GridEdge& ge = combs.edge_list[e];
    s += model.pairwise[e][static_cast<std::size_t>(output[ge.a]) * K + output[ge.b]] /
         static_cast<double>(combs.edge_coverage[e]);
  }
  return s;
}

double joint_comb_score(const GridModel& model, const CombDecomposition& combs,
                        const Output& output) {
  double s = 0.0;
  for (std::uint32_t p = 0; p < combs.combs.size(); ++p)
    s += comb_score(model, combs, p, output);
  return s;
}

GridStates full_grid_states(std::uint32_t nodes, std::uint32_t num_labels) {
  if (num_labels == 0) throw ShapeError("alphabet must be nonempty");
  std::vector<State> all(num_labels);
  for (std::uint32_t s = 0; s < num_labels; ++s) all[s] = static_cast<State>(s);
  return GridStates(nodes, all);
}

GridStates refine_grid_states(const GridStates& states, const StateHierarchy& hierarchy) {
  hierarchy.validate();
  GridStates out(states.size());
  for (std::uint32_t v = 0; v < states.size(); ++v) {
    for (State s : states[v]) {
      if (s >= hierarchy.coarse_labels)
        throw ConfigError("state " + std::to_string(s) +
                          " has no children in the refinement hierarchy");
      const auto& kids = hierarchy.children[s];
      out[v].insert(out[v].end(), kids.begin(), kids.end());
    }
    std::sort(out[v].begin(), out[v].end());
  }
  return out;
}

std::uint64_t grid_total_outputs(const GridStates& states, std::uint64_t cap) {
  std::uint64_t total = 1;
  for (const auto& s : states) {
    if (s.empty()) return 0;
    const std::uint64_t n = s.size();
    if (total > cap / n) return cap + 1;
    total *= n;
  }
  return total;
}

double EnsembleTable::joint_tau(double alpha) const {
  check_alpha(alpha);
  double t = 0.0;
  for (std::size_t p = 0; p < sub_max.size(); ++p)
    t += mean_max_tau(sub_max[p], sub_mean[p], alpha);
  return t;
}

EnsembleTable ensemble_max_marginals(const GridModel& model, const CombDecomposition& combs,
                                     const GridStates& states) {
  check_grid_model(model, combs);
  check_states(states, combs.nodes(), model.num_labels);

  EnsembleTable t;
  t.states = states;
  t.summed.resize(states.size());
  for (std::uint32_t v = 0; v < states.size(); ++v) t.summed[v].assign(states[v].size(), 0.0);

  std::vector<std::vector<double>> value;
  for (std::uint32_t p = 0; p < combs.combs.size(); ++p) {
    TreeEngine eng(&states, unary_tables_raw(model, combs, states),
                   edge_tables_raw(model, combs, combs.combs[p], states));
    const double gmax = eng.marginals(value);
    t.sub_max.push_back(gmax);
    t.sub_mean.push_back(mean_marginal(value));
    for (std::uint32_t v = 0; v < states.size(); ++v)
      for (std::size_t i = 0; i < value[v].size(); ++i) t.summed[v][i] += value[v][i];
    t.sub_values.push_back(value);
  }
  return t;
}

GridStates joint_filter(const EnsembleTable& table, double alpha) {
  const double tau = table.joint_tau(alpha);
  GridStates out(table.states.size());
  for (std::uint32_t v = 0; v < table.states.size(); ++v) {
    for (std::size_t i = 0; i < table.states[v].size(); ++i)
      if (table.summed[v][i] > tau) out[v].push_back(table.states[v][i]);
    if (out[v].empty())
      throw BreakdownError("joint filtering emptied node " + std::to_string(v) +
                               " (cascade breakdown)",
                           v);
  }
  return out;
}

double joint_efficiency_loss(const EnsembleTable& table, double tau) {
  std::uint64_t kept = 0, total = 0;
  for (std::uint32_t v = 0; v < table.summed.size(); ++v) {
    for (double m : table.summed[v]) kept += m > tau ? 1 : 0;
    total += table.summed[v].size();
  }
  if (total == 0) throw ShapeError("empty marginal table");
  return static_cast<double>(kept) / static_cast<double>(total);
}

double joint_filtering_loss(const GridModel& model, const CombDecomposition& combs,
                            const GridStates& states, const Output& truth, double alpha) {
  check_output(truth, combs.nodes(), model.num_labels);
  EnsembleTable table = ensemble_max_marginals(model, combs, states);
  if (!states_contain(states, truth)) return 1.0;
  return joint_comb_score(model, combs, truth) <= table.joint_tau(alpha) ? 1.0 : 0.0;
}

JointTable brute_force_joint_max_marginals(const GridModel& model,
                                           const CombDecomposition& combs,
                                           const GridStates& states) {
  check_grid_model(model, combs);
  check_states(states, combs.nodes(), model.num_labels);
  constexpr std::uint64_t kGuard = 1000000;
  if (grid_total_outputs(states, kGuard) > kGuard)
    throw ConfigError("grid admits more than 1e6 outputs; refusing to enumerate");

  const std::uint32_t N = combs.nodes();
  JointTable t;
  t.value.resize(N);
  for (std::uint32_t v = 0; v < N; ++v) t.value[v].assign(states[v].size(), kNegInf);

  std::vector<std::uint32_t> idx(N, 0);
  Output y(N);
  for (std::uint32_t v = 0; v < N; ++v) y[v] = states[v][0];
  while (true) {
    const double s = joint_comb_score(model, combs, y);
    for (std::uint32_t v = 0; v < N; ++v)
      if (s > t.value[v][idx[v]]) t.value[v][idx[v]] = s;
    if (s > t.global_max) t.global_max = s;

    std::uint32_t v = N;
    while (v-- > 0) {
      if (++idx[v] < states[v].size()) {
        y[v] = states[v][idx[v]];
        break;
      }
      idx[v] = 0;
      y[v] = states[v][0];
      if (v == 0) return t;
    }
  }
}

GridEnsembleModel make_grid_ensemble(std::uint32_t rows, std::uint32_t cols,
                                     std::uint32_t dimension, std::uint32_t num_labels) {
  GridEnsembleModel e;
  e.combs = comb_decompose(rows, cols);
  e.models.reserve(e.combs.combs.size());
  for (std::size_t p = 0; p < e.combs.combs.size(); ++p)
    e.models.push_back(LinearModel::grid(dimension, num_labels));
  return e;
}

double comb_score(const GridEnsembleModel& ensemble, std::uint32_t p, const GridInput& input,
                  const Output& output) {
  check_ensemble(ensemble);
  check_grid_input(input, ensemble.combs);
  check_output(output, ensemble.combs.nodes(), ensemble.num_labels());
  if (p >= ensemble.models.size()) throw ConfigError("sub-model index out of range");
  const LinearModel& m = ensemble.models[p];
  const CombDecomposition& combs = ensemble.combs;
  const double ncov = static_cast<double>(combs.node_coverage);
  double s = 0.0;
  for (std::uint32_t v = 0; v < combs.nodes(); ++v)
    s += hashed_unary(m, input.tokens[v], output[v]) / ncov;
  for (std::uint32_t e : combs.combs[p].edges) {
    const GridEdge& ge = combs.edge_list[e];
    s += hashed_pair(m, ge.orientation, output[ge.a], output[ge.b]) /
         static_cast<double>(combs.edge_coverage[e]);
  }
  return s;
}

double joint_comb_score(const GridEnsembleModel& ensemble, const GridInput& input,
                        const Output& output) {
  double s = 0.0;
  for (std::uint32_t p = 0; p < ensemble.models.size(); ++p)
    s += comb_score(ensemble, p, input, output);
  return s;
}

FeatureVector comb_featurize(const GridEnsembleModel& ensemble, std::uint32_t p,
                             const GridInput& input, const Output& output) {
  check_ensemble(ensemble);
  check_grid_input(input, ensemble.combs);
  check_output(output, ensemble.combs.nodes(), ensemble.num_labels());
  if (p >= ensemble.models.size()) throw ConfigError("sub-model index out of range");
  const LinearModel& m = ensemble.models[p];
  const CombDecomposition& combs = ensemble.combs;
  const double nval = 1.0 / static_cast<double>(combs.node_coverage);

  std::vector<std::pair<std::uint32_t, double>> pairs;
  for (std::uint32_t v = 0; v < combs.nodes(); ++v)
    for (const FeatureTemplate& tm : m.templates())
      if (tm.kind == TemplateKind::GridUnary)
        for (const std::string& key : input.tokens[v])
          pairs.push_back({m.emission_index(tm, key, output[v]), nval});
  for (std::uint32_t e : combs.combs[p].edges) {
    const GridEdge& ge = combs.edge_list[e];
    const double eval = 1.0 / static_cast<double>(combs.edge_coverage[e]);
    for (const FeatureTemplate& tm : m.templates())
      if (tm.kind == TemplateKind::GridPairwise)
        pairs.push_back(
            {m.grid_pair_index(tm, ge.orientation, output[ge.a], output[ge.b]), eval});
  }
  return FeatureVector::from_pairs(std::move(pairs));
}

EnsembleTable ensemble_max_marginals(const GridEnsembleModel& ensemble,
                                     const GridInput& input, const GridStates& states) {
  check_ensemble(ensemble);
  check_grid_input(input, ensemble.combs);
  check_states(states, ensemble.combs.nodes(), ensemble.num_labels());

  EnsembleTable t;
  t.states = states;
  t.summed.resize(states.size());
  for (std::uint32_t v = 0; v < states.size(); ++v) t.summed[v].assign(states[v].size(), 0.0);

  std::vector<std::vector<double>> value;
  for (std::uint32_t p = 0; p < ensemble.models.size(); ++p) {
    TreeEngine eng(&states,
                   unary_tables_learned(ensemble.models[p], ensemble.combs, input, states),
                   edge_tables_learned(ensemble.models[p], ensemble.combs,
                                       ensemble.combs.combs[p], states));
    const double gmax = eng.marginals(value);
    t.sub_max.push_back(gmax);
    t.sub_mean.push_back(mean_marginal(value));
    for (std::uint32_t v = 0; v < states.size(); ++v)
      for (std::size_t i = 0; i < value[v].size(); ++i) t.summed[v][i] += value[v][i];
    t.sub_values.push_back(value);
  }
  return t;
}

double joint_filtering_loss(const GridEnsembleModel& ensemble, const GridInput& input,
                            const GridStates& states, const Output& truth, double alpha) {
  check_output(truth, ensemble.combs.nodes(), ensemble.num_labels());
  EnsembleTable table = ensemble_max_marginals(ensemble, input, states);
  if (!states_contain(states, truth)) return 1.0;
  return joint_comb_score(ensemble, input, truth) <= table.joint_tau(alpha) ? 1.0 : 0.0;
}

void joint_sc_step(GridEnsembleModel& ensemble, const GridTrainExample& example,
                   double alpha, const TrainConfig& config, std::uint64_t t) {
  check_alpha(alpha);
  check_ensemble(ensemble);
  check_grid_input(example.input, ensemble.combs);
  const std::uint32_t nodes = ensemble.combs.nodes();
  check_output(example.truth, nodes, ensemble.num_labels());
  check_states(example.states, nodes, ensemble.num_labels());

  // Per sub-model inference, keeping the engines for witness extraction.
  const std::uint32_t P = static_cast<std::uint32_t>(ensemble.models.size());
  std::vector<TreeEngine> engines;
  engines.reserve(P);
  std::vector<std::vector<std::vector<double>>> values(P);
  double joint_tau = 0.0;
  for (std::uint32_t p = 0; p < P; ++p) {
    engines.emplace_back(
        &example.states,
        unary_tables_learned(ensemble.models[p], ensemble.combs, example.input, example.states),
        edge_tables_learned(ensemble.models[p], ensemble.combs, ensemble.combs.combs[p],
                            example.states));
    const double gmax = engines[p].marginals(values[p]);
    joint_tau += mean_max_tau(gmax, mean_marginal(values[p]), alpha);
  }
  const double joint_score = joint_comb_score(ensemble, example.input, example.truth);
  if (!std::isfinite(joint_tau) || !std::isfinite(joint_score))
    throw NumericError("non-finite joint threshold/score at step " + std::to_string(t) +
                       "; weights likely diverged");

  const double margin = config.margin_mode == MarginMode::ExampleLength
                            ? static_cast<double>(nodes)
                            : config.margin_value;
  const double hinge = std::max(0.0, margin + joint_tau - joint_score);
  const double eta = step_size(config, t);

  const double shrink = 1.0 - eta * config.lambda;
  if (shrink != 1.0)
    for (LinearModel& m : ensemble.models)
      for (double& w : m.weights()) w *= shrink;
  if (hinge <= 0.0) return;

  std::uint64_t total = 0;
  for (const auto& s : example.states) total += s.size();
  std::vector<std::uint32_t> ai;
  Output witness(nodes);
  for (std::uint32_t p = 0; p < P; ++p) {
    add_features(ensemble.models[p],
                 comb_featurize(ensemble, p, example.input, example.truth), eta);
    if (alpha > 0.0) {
      engines[p].witness(engines[p].argmax_node(), engines[p].argmax_idx(), ai);
      for (std::uint32_t v = 0; v < nodes; ++v) witness[v] = example.states[v][ai[v]];
      add_features(ensemble.models[p],
                   comb_featurize(ensemble, p, example.input, witness), -eta * alpha);
    }
    const double wmean = -eta * (1.0 - alpha) / static_cast<double>(total);
    for (std::uint32_t v = 0; v < nodes; ++v)
      for (std::uint32_t i = 0; i < example.states[v].size(); ++i) {
        engines[p].witness(v, i, ai);
        for (std::uint32_t u = 0; u < nodes; ++u) witness[u] = example.states[u][ai[u]];
        add_features(ensemble.models[p],
                     comb_featurize(ensemble, p, example.input, witness), wmean);
      }
  }
}

GridEnsembleModel train_grid_ensemble(const GridEnsembleModel& init,
                                      std::span<const GridTrainExample> examples,
                                      double alpha, const TrainConfig& config) {
  validate(config);
  check_alpha(alpha);
  check_ensemble(init);
  GridEnsembleModel ensemble = init;

  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < examples.size(); ++i)
    if (examples[i].margin_active) order.push_back(i);
  if (order.empty()) return ensemble;

  const std::size_t P = ensemble.models.size();
  std::vector<std::vector<double>> avg;
  if (config.average)
    avg.assign(P, std::vector<double>(ensemble.models[0].dimension(), 0.0));
  std::uint64_t steps = 0;

  Rng rng(config.seed);
  std::uint64_t t = 0;
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::uint32_t i : order) {
      joint_sc_step(ensemble, examples[i], alpha, config, ++t);
      if (config.average) {
        for (std::size_t p = 0; p < P; ++p) {
          const auto& w = ensemble.models[p].weights();
          for (std::size_t d = 0; d < w.size(); ++d) avg[p][d] += w[d];
        }
        ++steps;
      }
    }
    for (const LinearModel& m : ensemble.models)
      for (double w : m.weights())
        if (!std::isfinite(w))
          throw NumericError("weights diverged (non-finite) during joint training");
  }
  if (config.average && steps) {
    for (std::size_t p = 0; p < P; ++p) {
      auto& w = ensemble.models[p].weights();
      for (std::size_t d = 0; d < w.size(); ++d)
        w[d] = avg[p][d] / static_cast<double>(steps);
    }
  }
  return ensemble;
}

namespace {

// Per-example summary reused across candidate alphas during joint tuning.
struct JointDevStats {
  bool contained = false;
  double score = 0.0;
  std::vector<double> sub_max, sub_mean;
  std::vector<double> sorted;   // summed marginals ascending
  double min_node_max = kNegInf;  // breakdown begins once tau reaches this

  double tau(double alpha) const {
    double t = 0.0;
    for (std::size_t p = 0; p < sub_max.size(); ++p)
      t += mean_max_tau(sub_max[p], sub_mean[p], alpha);
    return t;
  }
};

}  // namespace

AlphaChoice tune_joint_alpha(const GridEnsembleModel& ensemble,
                             std::span<const GridTrainExample> dev,
                             const std::vector<double>& candidates, double epsilon) {
  if (dev.empty()) throw ConfigError("alpha tuning needs a nonempty dev set");
  if (candidates.empty()) throw ConfigError("alpha tuning needs candidates");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("tolerance must lie in [0,1]");

  std::vector<JointDevStats> stats;
  stats.reserve(dev.size());
  for (const GridTrainExample& ex : dev) {
    EnsembleTable table = ensemble_max_marginals(ensemble, ex.input, ex.states);
    JointDevStats s;
    s.sub_max = table.sub_max;
    s.sub_mean = table.sub_mean;
    s.contained = ex.margin_active && states_contain(ex.states, ex.truth);
    if (s.contained) s.score = joint_comb_score(ensemble, ex.input, ex.truth);
    double worst = kNegInf;
    s.min_node_max = -kNegInf;
    for (const auto& node : table.summed) {
      worst = kNegInf;
      for (double m : node) {
        s.sorted.push_back(m);
        worst = std::max(worst, m);
      }
      s.min_node_max = std::min(s.min_node_max, worst);
    }
    std::sort(s.sorted.begin(), s.sorted.end());
    stats.push_back(std::move(s));
  }

  // Candidate grid plus both sides of each example's critical alphas: where
  // the truth score meets the joint threshold, and where the hardest node
  // starts to break down.  Evaluation below is exact per candidate.
  std::vector<double> grid(candidates);
  for (double a : grid) check_alpha(a);
  grid.push_back(0.0);
  auto push_critical = [&grid](double target, double a_sum, double b_sum) {
    if (!(a_sum > b_sum)) return;
    const double critical = (target - b_sum) / (a_sum - b_sum);
    if (critical > 0.0 && critical < 1.0) {
      grid.push_back(critical);
      const double below = critical - 1e-9;
      if (below > 0.0) grid.push_back(below);
    }
  };
  for (const JointDevStats& s : stats) {
    double a_sum = 0.0, b_sum = 0.0;
    for (std::size_t p = 0; p < s.sub_max.size(); ++p) {
      a_sum += s.sub_max[p];
      b_sum += s.sub_mean[p];
    }
    if (s.contained) push_critical(s.score, a_sum, b_sum);
    push_critical(s.min_node_max, a_sum, b_sum);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const double n = static_cast<double>(stats.size());
  auto eval = [&](double a, double& lf, double& le, bool& broken) {
    lf = le = 0.0;
    broken = false;
    for (const JointDevStats& s : stats) {
      const double tau = s.tau(a);
      lf += (s.contained && s.score > tau) ? 0.0 : 1.0;
      le += static_cast<double>(s.sorted.end() -
                                std::upper_bound(s.sorted.begin(), s.sorted.end(), tau)) /
            static_cast<double>(s.sorted.size());
      if (s.min_node_max <= tau) broken = true;
    }
    lf /= n;
    le /= n;
  };

  AlphaChoice best;
  bool have_best = false;
  for (double a : grid) {
    double lf, le;
    bool broken;
    eval(a, lf, le, broken);
    if (lf > epsilon || broken) continue;
    if (!have_best || le <= best.mean_efficiency_loss) {
      best = {a, true, lf, le};
      have_best = true;
    }
  }
  if (have_best) return best;
  double lf, le;
  bool broken;
  eval(0.0, lf, le, broken);
  return {0.0, false, lf, le};
}

TrainedGridCascade grid_coarse_to_fine(const GridDataset& train, const GridDataset& dev,
                                       const GridCascadeConfig& config) {
  if (config.levels.empty()) throw ConfigError("cascade needs at least one level");
  if (config.dimension == 0) throw ConfigError("feature dimension must be >= 1");
  if (config.hierarchies.size() + 1 != config.levels.size())
    throw ConfigError("a cascade of L levels needs exactly L-1 refinement hierarchies");
  if (train.num_labels != dev.num_labels)
    throw DataError("train and dev label alphabets differ");
  if (train.examples.empty() || dev.examples.empty())
    throw DataError("grid cascade needs nonempty train and dev sets");
  const std::size_t T = config.levels.size();
  for (const GridLevelConfig& lc : config.levels) {
    validate(lc.train);
    if (lc.alpha_candidates.empty()) throw ConfigError("empty alpha candidate set");
    for (double a : lc.alpha_candidates) check_alpha(a);
    if (!(lc.tolerance >= 0.0 && lc.tolerance <= 1.0))
      throw ConfigError("tolerance must lie in [0,1]");
  }

  // All examples must share one grid shape (the decomposition, and hence the
  // sub-model count, is fixed by it).
  const std::uint32_t rows = train.examples[0].input.rows;
  const std::uint32_t cols = train.examples[0].input.cols;
  const std::uint32_t nodes = rows * cols;

  // Alphabets walk backward from the dataset's labels through the
  // hierarchies; relabel[t] maps dataset labels to level-t labels.
  std::vector<std::uint32_t> K(T);
  std::vector<std::vector<State>> relabel(T);
  K[T - 1] = train.num_labels;
  relabel[T - 1].resize(train.num_labels);
  for (std::uint32_t s = 0; s < train.num_labels; ++s)
    relabel[T - 1][s] = static_cast<State>(s);
  for (std::size_t t = T - 1; t-- > 0;) {
    const StateHierarchy& h = config.hierarchies[t];
    h.validate();
    if (h.fine_labels != K[t + 1])
      throw ConfigError("hierarchy after level " + std::to_string(t) +
                        " does not produce the next level's alphabet");
    K[t] = h.coarse_labels;
    relabel[t].resize(train.num_labels);
    for (std::uint32_t s = 0; s < train.num_labels; ++s)
      relabel[t][s] = h.parent(relabel[t + 1][s]);
  }

  auto build = [&](const GridDataset& data) {
    std::vector<GridTrainExample> out;
    out.reserve(data.examples.size());
    for (std::size_t i = 0; i < data.examples.size(); ++i) {
      const GridExample& ex = data.examples[i];
      if (ex.input.rows != rows || ex.input.cols != cols)
        throw DataError("example " + std::to_string(i) +
                        ": all grid examples must share one shape");
      check_output(ex.truth, nodes, data.num_labels);
      GridTrainExample te;
      te.input = ex.input;
      te.truth.resize(nodes);
      for (std::uint32_t v = 0; v < nodes; ++v) te.truth[v] = relabel[0][ex.truth[v]];
      te.states = full_grid_states(nodes, K[0]);
      out.push_back(std::move(te));
    }
    return out;
  };
  std::vector<GridTrainExample> train_ex = build(train);
  std::vector<GridTrainExample> dev_ex = build(dev);

  TrainedGridCascade cascade;
  cascade.levels.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const GridLevelConfig& lc = config.levels[t];
    GridEnsembleModel proto = make_grid_ensemble(rows, cols, config.dimension, K[t]);

    GridEnsembleModel best_model;
    AlphaChoice best_choice;
    double best_train_alpha = 0.0;
    bool have = false;
    for (double a : lc.alpha_candidates) {
      GridEnsembleModel m = train_grid_ensemble(proto, train_ex, a, lc.train);
      AlphaChoice c = tune_joint_alpha(m, dev_ex, lc.alpha_candidates, lc.tolerance);
      bool better;
      if (!have) {
        better = true;
      } else if (c.feasible != best_choice.feasible) {
        better = c.feasible;
      } else if (c.feasible) {
        better = c.mean_efficiency_loss < best_choice.mean_efficiency_loss ||
                 (c.mean_efficiency_loss == best_choice.mean_efficiency_loss &&
                  c.alpha > best_choice.alpha);
      } else {
        better = c.mean_filter_loss < best_choice.mean_filter_loss ||
                 (c.mean_filter_loss == best_choice.mean_filter_loss &&
                  c.mean_efficiency_loss < best_choice.mean_efficiency_loss);
      }
      if (better) {
        best_model = std::move(m);
        best_choice = c;
        best_train_alpha = a;
        have = true;
      }
    }

    GridLevelReport report;
    report.train_alpha = best_train_alpha;
    report.alpha = best_choice.alpha;
    report.feasible = best_choice.feasible;
    report.dev_filter_loss = best_choice.mean_filter_loss;
    report.dev_efficiency_loss = best_choice.mean_efficiency_loss;

    auto prune = [&](std::vector<GridTrainExample>& exs, std::uint32_t& pruned) {
      double density = 0.0;
      for (GridTrainExample& ex : exs) {
        EnsembleTable table = ensemble_max_marginals(best_model, ex.input, ex.states);
        ex.states = joint_filter(table, best_choice.alpha);
        std::uint64_t kept = 0;
        for (const auto& s : ex.states) kept += s.size();
        density += static_cast<double>(kept) / (static_cast<double>(nodes) * K[t]);
        if (ex.margin_active && !states_contain(ex.states, ex.truth)) {
          ex.margin_active = false;
          ++pruned;
        }
      }
      return density / static_cast<double>(exs.size());
    };
    prune(train_ex, report.truth_pruned_train);
    report.dev_density = prune(dev_ex, report.truth_pruned_dev);

    cascade.levels.push_back({std::move(best_model), best_choice.alpha,
                              t + 1 < T ? std::optional<StateHierarchy>(config.hierarchies[t])
                                        : std::nullopt,
                              report});

    if (t + 1 < T) {
      const StateHierarchy& h = config.hierarchies[t];
      auto advance = [&](std::vector<GridTrainExample>& exs, const GridDataset& data) {
        for (std::size_t i = 0; i < exs.size(); ++i) {
          exs[i].states = refine_grid_states(exs[i].states, h);
          for (std::uint32_t v = 0; v < nodes; ++v)
            exs[i].truth[v] = relabel[t + 1][data.examples[i].truth[v]];
        }
      };
      advance(train_ex, train);
      advance(dev_ex, dev);
    }
  }
  return cascade;
}

GridStates apply_grid_cascade(const TrainedGridCascade& cascade, const GridInput& input) {
  if (cascade.levels.empty()) throw ConfigError("cascade has no levels");
  GridStates states =
      full_grid_states(input.nodes(), cascade.levels[0].ensemble.num_labels());
  for (const GridCascadeLevel& level : cascade.levels) {
    EnsembleTable table = ensemble_max_marginals(level.ensemble, input, states);
    states = joint_filter(table, level.alpha);
    if (level.hierarchy) states = refine_grid_states(states, *level.hierarchy);
  }
  return states;
}

GridCascadeEval evaluate_grid_cascade(const TrainedGridCascade& cascade,
                                      const GridDataset& data) {
  if (cascade.levels.empty()) throw ConfigError("cascade has no levels");
  const std::size_t T = cascade.levels.size();
  const std::uint32_t fine = cascade.levels[T - 1].ensemble.num_labels();
  if (data.num_labels != fine)
    throw DataError("dataset alphabet does not match the cascade's final alphabet");

  std::vector<std::vector<State>> relabel(T);
  relabel[T - 1].resize(fine);
  for (std::uint32_t s = 0; s < fine; ++s) relabel[T - 1][s] = static_cast<State>(s);
  for (std::size_t t = T - 1; t-- > 0;) {
    if (!cascade.levels[t].hierarchy)
      throw ConfigError("non-final cascade level " + std::to_string(t) +
                        " is missing its refinement hierarchy");
    const StateHierarchy& h = *cascade.levels[t].hierarchy;
    relabel[t].resize(fine);
    for (std::uint32_t s = 0; s < fine; ++s) relabel[t][s] = h.parent(relabel[t + 1][s]);
  }

  GridCascadeEval eval;
  eval.level_filter_loss.assign(T, 0.0);
  eval.level_efficiency_loss.assign(T, 0.0);
  eval.level_density.assign(T, 0.0);
  std::uint64_t recalled = 0;

  for (const GridExample& ex : data.examples) {
    const std::uint32_t nodes = ex.input.nodes();
    GridStates states = full_grid_states(nodes, cascade.levels[0].ensemble.num_labels());
    bool alive = true;
    for (std::size_t t = 0; t < T; ++t) {
      const GridCascadeLevel& level = cascade.levels[t];
      if (!alive) {
        eval.level_filter_loss[t] += 1.0;
        continue;
      }
      Output truth_t(nodes);
      for (std::uint32_t v = 0; v < nodes; ++v) truth_t[v] = relabel[t][ex.truth[v]];
      const bool contained = states_contain(states, truth_t);
      EnsembleTable table = ensemble_max_marginals(level.ensemble, ex.input, states);
      const double tau = table.joint_tau(level.alpha);
      const double score = joint_comb_score(level.ensemble, ex.input, truth_t);
      eval.level_filter_loss[t] += (contained && score > tau) ? 0.0 : 1.0;
      eval.level_efficiency_loss[t] += joint_efficiency_loss(table, tau);
      try {
        states = joint_filter(table, level.alpha);
      } catch (const BreakdownError&) {
        ++eval.breakdowns;
        alive = false;
        continue;
      }
      std::uint64_t kept = 0;
      for (const auto& s : states) kept += s.size();
      eval.level_density[t] += static_cast<double>(kept) /
                               (static_cast<double>(nodes) * level.ensemble.num_labels());
      if (level.hierarchy) states = refine_grid_states(states, *level.hierarchy);
    }
    if (alive) {
      std::uint64_t kept = 0;
      for (const auto& s : states) kept += s.size();
      eval.final_density += static_cast<double>(kept) / (static_cast<double>(nodes) * fine);
      if (states_contain(states, ex.truth)) ++recalled;
    }
  }

  const double n = static_cast<double>(data.examples.size());
  if (!data.examples.empty()) {
    for (std::size_t t = 0; t < T; ++t) {
      eval.level_filter_loss[t] /= n;
      eval.level_efficiency_loss[t] /= n;
      eval.level_density[t] /= n;
    }
    eval.final_density /= n;
    eval.truth_recall = static_cast<double>(recalled) / n;
  }
  return eval;
}

}  // namespace cascade
