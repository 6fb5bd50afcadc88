// Implementation of the chain inference engine (see chain_engine.hpp).

#include "chain_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cascade::detail {

namespace {

// Log-sum-exp of (already collected) values via max-shift; -inf safe.
double lse(const std::vector<double>& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

ChainEngine::ChainEngine(const LinearModel& model, const SequenceInput& input,
                         const SparseLattice& lattice)
    : model_(model), input_(input), lat_(lattice) {
  if (input.length() != lattice.length())
    throw ShapeError("input length does not match lattice length");
  if (model.num_labels() != lattice.num_labels())
    throw ShapeError("model and lattice label alphabets differ");
  if (model.order() > lattice.order())
    throw ShapeError("model order exceeds lattice order");

  P_ = lat_.anchors();
  d_ = lat_.order();
  dm_ = model.order();
  spanning_ = (dm_ == d_);

  width0_ = 0;
  for (std::uint32_t t = 0; t < d_; ++t) width0_ += std::min(dm_ + 1, t + 1);
  width_ = std::min(dm_ + 1, d_);

  // Templates grouped by the clique size they fire on.
  std::vector<std::vector<const FeatureTemplate*>> by_size(dm_ + 2);
  std::vector<const FeatureTemplate*> unary;
  for (const FeatureTemplate& t : model.templates()) {
    if (t.kind == TemplateKind::UnaryEmission) unary.push_back(&t);
    if (t.kind == TemplateKind::NgramTransition && t.ngram_order + 1 <= dm_ + 1)
      by_size[t.ngram_order + 1].push_back(&t);
  }

  const std::vector<double>& w = model.weights();
  const std::uint32_t L = input.length();
  const std::uint32_t K = model.num_labels();

  // Unary emission scores per (position, state), hashed once.
  std::vector<double> U(static_cast<std::size_t>(L) * K, 0.0);
  for (std::uint32_t t = 0; t < L; ++t)
    for (std::uint32_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (const FeatureTemplate* tm : unary)
        for (const std::string& key : input.tokens[t])
          s += w[model.emission_index(*tm, key, static_cast<State>(k))];
      U[static_cast<std::size_t>(t) * K + k] = s;
    }

  auto gram_score = [&](std::span<const State> states) {
    double s = 0.0;
    for (const FeatureTemplate* tm : by_size[states.size()])
      s += w[model.transition_index(*tm, states)];
    return s;
  };

  // Block clique scores.
  block_begin_.resize(P_);
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < P_; ++i) {
    block_begin_[i] = total;
    total += static_cast<std::size_t>(lat_.count(i)) * block_width(i);
  }
  block_.assign(total, 0.0);
  node_sum_.resize(P_);

  for (std::uint32_t i = 0; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    node_sum_[i].assign(n, 0.0);
    for (std::uint32_t idx = 0; idx < n; ++idx) {
      std::span<const State> T = lat_.tuple(i, idx);
      std::size_t at = block_begin_[i] + static_cast<std::size_t>(idx) * block_width(i);
      std::uint32_t k = 0;
      double sum = 0.0;
      auto put = [&](double v) {
        block_[at + k++] = v;
        sum += v;
      };
      if (i == 0) {
        for (std::uint32_t t = 0; t < d_; ++t) {
          std::uint32_t max_size = std::min(dm_ + 1, t + 1);
          for (std::uint32_t s = 1; s <= max_size; ++s) {
            if (s == 1)
              put(U[static_cast<std::size_t>(t) * K + T[t]]);
            else
              put(gram_score(T.subspan(t - s + 1, s)));
          }
        }
      } else {
        const std::uint32_t t = i + d_ - 1;
        for (std::uint32_t s = 1; s <= width_; ++s) {
          if (s == 1)
            put(U[static_cast<std::size_t>(t) * K + T[d_ - 1]]);
          else
            put(gram_score(T.subspan(d_ - s, s)));
        }
      }
      node_sum_[i][idx] = sum;
    }
  }

  // Spanning clique scores per transition.
  trans_.resize(P_ > 0 ? P_ - 1 : 0);
  if (spanning_) {
    std::vector<State> gram(d_ + 1);
    for (std::uint32_t p = 0; p + 1 < P_; ++p) {
      const auto& ts = lat_.transitions(p);
      trans_[p].resize(ts.size());
      for (std::size_t k = 0; k < ts.size(); ++k) {
        std::span<const State> left = lat_.tuple(p, ts[k].first);
        std::copy(left.begin(), left.end(), gram.begin());
        gram[d_] = lat_.tuple(p + 1, ts[k].second).back();
        trans_[p][k] = gram_score(gram);
      }
    }
  } else {
    for (std::uint32_t p = 0; p + 1 < P_; ++p)
      trans_[p].assign(lat_.transitions(p).size(), 0.0);
  }

  // CSR adjacency.  Transition lists are sorted by (left, right), so the
  // successor view groups naturally; the predecessor view is bucket-filled,
  // which keeps left indices ascending within each bucket.
  succ_off_.resize(P_ > 0 ? P_ - 1 : 0);
  succ_tr_.resize(succ_off_.size());
  pred_off_.resize(succ_off_.size());
  pred_tr_.resize(succ_off_.size());
  for (std::uint32_t p = 0; p + 1 < P_; ++p) {
    const auto& ts = lat_.transitions(p);
    const std::uint32_t nl = lat_.count(p), nr = lat_.count(p + 1);
    auto& soff = succ_off_[p];
    auto& str = succ_tr_[p];
    soff.assign(nl + 1, 0);
    str.resize(ts.size());
    for (const auto& t : ts) ++soff[t.first + 1];
    for (std::uint32_t l = 0; l < nl; ++l) soff[l + 1] += soff[l];
    {
      std::vector<std::uint32_t> cur(soff.begin(), soff.end() - 1);
      for (std::uint32_t k = 0; k < ts.size(); ++k) str[cur[ts[k].first]++] = k;
    }
    auto& poff = pred_off_[p];
    auto& ptr = pred_tr_[p];
    poff.assign(nr + 1, 0);
    ptr.resize(ts.size());
    for (const auto& t : ts) ++poff[t.second + 1];
    for (std::uint32_t r = 0; r < nr; ++r) poff[r + 1] += poff[r];
    {
      std::vector<std::uint32_t> cur(poff.begin(), poff.end() - 1);
      for (std::uint32_t k = 0; k < ts.size(); ++k) ptr[cur[ts[k].second]++] = k;
    }
  }

  // Forward pass: exact fold along the chosen backpointer path.  Candidate
  // comparisons scan predecessors in ascending left index with strict
  // improvement, so ties pick the lexicographically smallest tuple.
  F_.resize(P_);
  bp_.resize(P_);
  F_[0].resize(lat_.count(0));
  bp_[0].assign(lat_.count(0), npos);
  for (std::uint32_t b = 0; b < lat_.count(0); ++b) {
    double v = 0.0;
    for (std::uint32_t k = 0; k < width0_; ++k) v += block_entry(0, b, k);
    F_[0][b] = v;
  }
  for (std::uint32_t i = 1; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    F_[i].assign(n, kNegInf);
    bp_[i].assign(n, npos);
    const auto& ts = lat_.transitions(i - 1);
    for (std::uint32_t b = 0; b < n; ++b) {
      double best = kNegInf;
      std::uint32_t best_l = npos, best_t = npos;
      for (std::uint32_t q = pred_off_[i - 1][b]; q < pred_off_[i - 1][b + 1]; ++q) {
        std::uint32_t tidx = pred_tr_[i - 1][q];
        std::uint32_t l = ts[tidx].first;
        if (F_[i - 1][l] == kNegInf) continue;
        double cand = F_[i - 1][l] + trans_[i - 1][tidx];
        if (cand > best) {
          best = cand;
          best_l = l;
          best_t = tidx;
        }
      }
      if (best_l == npos) continue;  // unreachable from the left
      double v = F_[i - 1][best_l];
      for (std::uint32_t k = 0; k < width_; ++k) v += block_entry(i, b, k);
      if (spanning_) v += trans_[i - 1][best_t];
      F_[i][b] = v;
      bp_[i][b] = best_l;
    }
  }

  // Backward pass: block-sum messages with forward pointers; ties pick the
  // smallest successor index, which makes greedy reconstruction from the
  // left yield the lexicographically smallest argmax.
  B_.resize(P_);
  fp_.resize(P_);
  B_[P_ - 1].assign(lat_.count(P_ - 1), 0.0);
  fp_[P_ - 1].assign(lat_.count(P_ - 1), npos);
  for (std::uint32_t i = P_ - 1; i-- > 0;) {
    const std::uint32_t n = lat_.count(i);
    B_[i].assign(n, kNegInf);
    fp_[i].assign(n, npos);
    const auto& ts = lat_.transitions(i);
    for (std::uint32_t a = 0; a < n; ++a) {
      double best = kNegInf;
      std::uint32_t best_r = npos;
      for (std::uint32_t q = succ_off_[i][a]; q < succ_off_[i][a + 1]; ++q) {
        std::uint32_t tidx = succ_tr_[i][q];
        std::uint32_t r = ts[tidx].second;
        if (B_[i + 1][r] == kNegInf) continue;
        double cand = trans_[i][tidx] + node_sum_[i + 1][r] + B_[i + 1][r];
        if (cand > best) {
          best = cand;
          best_r = r;
        }
      }
      B_[i][a] = best == kNegInf ? kNegInf : best;
      fp_[i][a] = best_r;
    }
  }
}

double ChainEngine::fold_path(const std::vector<std::uint32_t>& idxs) const {
  double v = 0.0;
  for (std::uint32_t k = 0; k < width0_; ++k) v += block_entry(0, idxs[0], k);
  for (std::uint32_t i = 1; i < P_; ++i) {
    for (std::uint32_t k = 0; k < width_; ++k) v += block_entry(i, idxs[i], k);
    if (spanning_) {
      const auto& ts = lat_.transitions(i - 1);
      auto it = std::lower_bound(ts.begin(), ts.end(),
                                 Transition{idxs[i - 1], idxs[i]});
      v += trans_[i - 1][static_cast<std::size_t>(it - ts.begin())];
    }
  }
  return v;
}

Output ChainEngine::assemble(const std::vector<std::uint32_t>& idxs) const {
  Output y;
  y.reserve(lat_.length());
  std::span<const State> first = lat_.tuple(0, idxs[0]);
  y.assign(first.begin(), first.end());
  for (std::uint32_t i = 1; i < P_; ++i) y.push_back(lat_.tuple(i, idxs[i]).back());
  return y;
}

bool ChainEngine::witness_indices(std::uint32_t anchor, std::uint32_t idx,
                                  std::vector<std::uint32_t>& idxs) const {
  if (F_[anchor][idx] == kNegInf || B_[anchor][idx] == kNegInf) return false;
  idxs.assign(P_, npos);
  idxs[anchor] = idx;
  for (std::uint32_t i = anchor; i > 0; --i) {
    idxs[i - 1] = bp_[i][idxs[i]];
    if (idxs[i - 1] == npos) return false;
  }
  for (std::uint32_t i = anchor; i + 1 < P_; ++i) {
    idxs[i + 1] = fp_[i][idxs[i]];
    if (idxs[i + 1] == npos) return false;
  }
  return true;
}

MaxMarginalTable ChainEngine::max_marginal_table() const {
  MaxMarginalTable t;
  t.anchors = P_;
  t.order = d_;
  t.value.resize(P_);
  t.witness.resize(P_);
  std::vector<std::uint32_t> idxs;
  bool any = false;
  for (std::uint32_t i = 0; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    t.value[i].assign(n, kNegInf);
    t.witness[i].resize(n);
    for (std::uint32_t a = 0; a < n; ++a) {
      if (!witness_indices(i, a, idxs)) continue;
      t.value[i][a] = fold_path(idxs);
      t.witness[i][a] = assemble(idxs);
      t.global_max = std::max(t.global_max, t.value[i][a]);
      any = true;
    }
  }
  if (any) t.global_argmax = decode().first;
  return t;
}

double ChainEngine::max_marginal_values(std::vector<std::vector<double>>& value) const {
  value.resize(P_);
  double gmax = kNegInf;
  std::vector<std::uint32_t> idxs;
  for (std::uint32_t i = 0; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    value[i].assign(n, kNegInf);
    for (std::uint32_t a = 0; a < n; ++a) {
      if (!witness_indices(i, a, idxs)) continue;
      value[i][a] = fold_path(idxs);
      gmax = std::max(gmax, value[i][a]);
    }
  }
  return gmax;
}

std::pair<Output, double> ChainEngine::decode() const {
  double best = kNegInf;
  std::uint32_t b0 = npos;
  for (std::uint32_t b = 0; b < lat_.count(0); ++b) {
    if (F_[0][b] == kNegInf || B_[0][b] == kNegInf) continue;
    double q = F_[0][b] + B_[0][b];
    if (q > best) {
      best = q;
      b0 = b;
    }
  }
  if (b0 == npos)
    throw BrokenLatticeError("lattice admits no complete output", 0);
  std::vector<std::uint32_t> idxs(P_, npos);
  idxs[0] = b0;
  for (std::uint32_t i = 0; i + 1 < P_; ++i) idxs[i + 1] = fp_[i][idxs[i]];
  return {assemble(idxs), fold_path(idxs)};
}

SumProductResult ChainEngine::sum_product() const {
  SumProductResult out;
  out.table.anchors = P_;
  out.table.order = d_;
  out.table.posterior.resize(P_);

  std::vector<std::vector<double>> la(P_), lb(P_);
  std::vector<double> scratch;
  la[0] = node_sum_[0];
  for (std::uint32_t i = 1; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    la[i].assign(n, kNegInf);
    const auto& ts = lat_.transitions(i - 1);
    for (std::uint32_t b = 0; b < n; ++b) {
      scratch.clear();
      for (std::uint32_t q = pred_off_[i - 1][b]; q < pred_off_[i - 1][b + 1]; ++q) {
        std::uint32_t tidx = pred_tr_[i - 1][q];
        scratch.push_back(la[i - 1][ts[tidx].first] + trans_[i - 1][tidx]);
      }
      double m = lse(scratch);
      la[i][b] = m == kNegInf ? kNegInf : node_sum_[i][b] + m;
    }
  }
  lb[P_ - 1].assign(lat_.count(P_ - 1), 0.0);
  for (std::uint32_t i = P_ - 1; i-- > 0;) {
    const std::uint32_t n = lat_.count(i);
    lb[i].assign(n, kNegInf);
    const auto& ts = lat_.transitions(i);
    for (std::uint32_t a = 0; a < n; ++a) {
      scratch.clear();
      for (std::uint32_t q = succ_off_[i][a]; q < succ_off_[i][a + 1]; ++q) {
        std::uint32_t tidx = succ_tr_[i][q];
        std::uint32_t r = ts[tidx].second;
        scratch.push_back(trans_[i][tidx] + node_sum_[i + 1][r] + lb[i + 1][r]);
      }
      lb[i][a] = lse(scratch);
    }
  }
  double logZ = lse(la[P_ - 1]);
  if (logZ == kNegInf)
    throw BrokenLatticeError("lattice admits no complete output", 0);
  out.table.log_partition = logZ;

  for (std::uint32_t i = 0; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    out.table.posterior[i].assign(n, 0.0);
    for (std::uint32_t a = 0; a < n; ++a) {
      double l = la[i][a] + lb[i][a];
      out.table.posterior[i][a] = l == kNegInf ? 0.0 : std::exp(l - logZ);
    }
  }
  out.edge_posterior.resize(P_ > 0 ? P_ - 1 : 0);
  for (std::uint32_t p = 0; p + 1 < P_; ++p) {
    const auto& ts = lat_.transitions(p);
    out.edge_posterior[p].assign(ts.size(), 0.0);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      double l = la[p][ts[k].first] + trans_[p][k] + node_sum_[p + 1][ts[k].second] +
                 lb[p + 1][ts[k].second];
      out.edge_posterior[p][k] = l == kNegInf ? 0.0 : std::exp(l - logZ);
    }
  }
  return out;
}

template <class Fn>
void ChainEngine::enumerate_block_features(std::uint32_t anchor, std::uint32_t idx,
                                           Fn&& fn) const {
  std::span<const State> T = lat_.tuple(anchor, idx);
  auto emit_sizes = [&](std::uint32_t t_in_tuple, std::uint32_t input_pos,
                        std::uint32_t max_size) {
    for (std::uint32_t s = 1; s <= max_size; ++s) {
      if (s == 1) {
        for (const FeatureTemplate& tm : model_.templates())
          if (tm.kind == TemplateKind::UnaryEmission)
            for (const std::string& key : input_.tokens[input_pos])
              fn(model_.emission_index(tm, key, T[t_in_tuple]));
      } else {
        for (const FeatureTemplate& tm : model_.templates())
          if (tm.kind == TemplateKind::NgramTransition && tm.ngram_order + 1 == s)
            fn(model_.transition_index(tm, T.subspan(t_in_tuple - s + 1, s)));
      }
    }
  };
  if (anchor == 0) {
    for (std::uint32_t t = 0; t < d_; ++t) emit_sizes(t, t, std::min(dm_ + 1, t + 1));
  } else {
    emit_sizes(d_ - 1, anchor + d_ - 1, width_);
  }
}

void ChainEngine::pointer_tree_sizes(std::vector<std::vector<std::uint64_t>>& desc,
                                     std::vector<std::vector<std::uint64_t>>& anc) const {
  desc.resize(P_);
  anc.resize(P_);
  auto own = [&](std::uint32_t i, std::uint32_t a) -> std::uint64_t {
    return (F_[i][a] != kNegInf && B_[i][a] != kNegInf) ? 1 : 0;
  };
  for (std::uint32_t i = P_; i-- > 0;) {
    const std::uint32_t n = lat_.count(i);
    desc[i].assign(n, 0);
    for (std::uint32_t a = 0; a < n; ++a) desc[i][a] = own(i, a);
    if (i + 1 < P_)
      for (std::uint32_t b = 0; b < lat_.count(i + 1); ++b)
        if (bp_[i + 1][b] != npos) desc[i][bp_[i + 1][b]] += desc[i + 1][b];
  }
  for (std::uint32_t i = 0; i < P_; ++i) {
    const std::uint32_t n = lat_.count(i);
    anc[i].assign(n, 0);
    for (std::uint32_t a = 0; a < n; ++a) anc[i][a] = own(i, a);
    if (i > 0)
      for (std::uint32_t b = 0; b < lat_.count(i - 1); ++b)
        if (fp_[i - 1][b] != npos) anc[i][fp_[i - 1][b]] += anc[i - 1][b];
  }
}

void ChainEngine::add_witness_features(double weight, std::vector<double>& delta,
                                       std::vector<std::uint32_t>& touched) const {
  std::vector<std::vector<std::uint64_t>> desc, anc;
  pointer_tree_sizes(desc, anc);
  auto add = [&](std::uint32_t idx, double v) {
    if (delta[idx] == 0.0) touched.push_back(idx);
    delta[idx] += v;
  };
  auto own = [&](std::uint32_t i, std::uint32_t a) -> std::uint64_t {
    return (F_[i][a] != kNegInf && B_[i][a] != kNegInf) ? 1 : 0;
  };
  for (std::uint32_t i = 0; i < P_; ++i)
    for (std::uint32_t a = 0; a < lat_.count(i); ++a) {
      std::uint64_t mult = desc[i][a] + anc[i][a] - own(i, a);
      if (mult == 0) continue;
      double v = weight * static_cast<double>(mult);
      enumerate_block_features(i, a, [&](std::uint32_t idx) { add(idx, v); });
    }
  if (!spanning_) return;
  std::vector<State> gram(d_ + 1);
  for (std::uint32_t p = 0; p + 1 < P_; ++p) {
    const auto& ts = lat_.transitions(p);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      std::uint32_t l = ts[k].first, r = ts[k].second;
      std::uint64_t mult = 0;
      if (bp_[p + 1][r] == l) mult += desc[p + 1][r];
      if (fp_[p][l] == r) mult += anc[p][l];
      if (mult == 0) continue;
      std::span<const State> left = lat_.tuple(p, l);
      std::copy(left.begin(), left.end(), gram.begin());
      gram[d_] = lat_.tuple(p + 1, r).back();
      double v = weight * static_cast<double>(mult);
      for (const FeatureTemplate& tm : model_.templates())
        if (tm.kind == TemplateKind::NgramTransition && tm.ngram_order == d_)
          add(model_.transition_index(tm, gram), v);
    }
  }
}

void ChainEngine::add_expected_features(const SumProductResult& sp, double weight,
                                        std::vector<double>& delta,
                                        std::vector<std::uint32_t>& touched) const {
  auto add = [&](std::uint32_t idx, double v) {
    if (delta[idx] == 0.0) touched.push_back(idx);
    delta[idx] += v;
  };
  for (std::uint32_t i = 0; i < P_; ++i)
    for (std::uint32_t a = 0; a < lat_.count(i); ++a) {
      double post = sp.table.posterior[i][a];
      if (post == 0.0) continue;
      double v = weight * post;
      enumerate_block_features(i, a, [&](std::uint32_t idx) { add(idx, v); });
    }
  if (!spanning_) return;
  std::vector<State> gram(d_ + 1);
  for (std::uint32_t p = 0; p + 1 < P_; ++p) {
    const auto& ts = lat_.transitions(p);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      double post = sp.edge_posterior[p][k];
      if (post == 0.0) continue;
      std::span<const State> left = lat_.tuple(p, ts[k].first);
      std::copy(left.begin(), left.end(), gram.begin());
      gram[d_] = lat_.tuple(p + 1, ts[k].second).back();
      double v = weight * post;
      for (const FeatureTemplate& tm : model_.templates())
        if (tm.kind == TemplateKind::NgramTransition && tm.ngram_order == d_)
          add(model_.transition_index(tm, gram), v);
    }
  }
}

}  // namespace cascade::detail
