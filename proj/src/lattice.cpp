// Implementation of sparse lattices (see lattice.hpp).

#include "cascade/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cascade {

namespace {

// Guard on materializing assignment tables; full() refuses beyond this.
constexpr std::uint64_t kMaxFullAssignments = 100'000'000ull;

bool tuple_less(std::span<const State> a, std::span<const State> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool tuple_eq(std::span<const State> a, std::span<const State> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

StateHierarchy StateHierarchy::even_split(std::uint32_t coarse, std::uint32_t branching) {
  if (coarse == 0 || branching == 0)
    throw ConfigError("hierarchy split needs positive sizes");
  StateHierarchy h;
  h.coarse_labels = coarse;
  h.fine_labels = coarse * branching;
  h.children.resize(coarse);
  for (std::uint32_t c = 0; c < coarse; ++c)
    for (std::uint32_t b = 0; b < branching; ++b)
      h.children[c].push_back(static_cast<State>(c * branching + b));
  return h;
}

State StateHierarchy::parent(State fine) const {
  for (std::size_t c = 0; c < children.size(); ++c)
    for (State f : children[c])
      if (f == fine) return static_cast<State>(c);
  throw ConfigError("fine state " + std::to_string(fine) + " has no coarse parent");
}

void StateHierarchy::validate() const {
  if (children.size() != coarse_labels)
    throw ConfigError("hierarchy must list children for every coarse state");
  std::vector<char> seen(fine_labels, 0);
  for (const auto& kids : children) {
    if (kids.empty()) throw ConfigError("hierarchy has a childless coarse state");
    for (State f : kids) {
      if (f >= fine_labels) throw ConfigError("hierarchy child exceeds fine_labels");
      if (seen[f]) throw ConfigError("hierarchy children overlap");
      seen[f] = 1;
    }
  }
  for (std::uint32_t f = 0; f < fine_labels; ++f)
    if (!seen[f]) throw ConfigError("hierarchy does not cover fine state " + std::to_string(f));
}

SparseLattice SparseLattice::full(std::uint32_t length, std::uint32_t num_labels,
                                  std::uint32_t order) {
  if (order == 0) throw ShapeError("lattice order must be >= 1");
  if (length == 0) throw ShapeError("lattice length must be >= 1");
  if (order > length)
    throw ShapeError("lattice order " + std::to_string(order) +
                     " exceeds output length " + std::to_string(length));
  if (num_labels == 0) throw ConfigError("lattice needs at least one label");

  std::uint64_t per_anchor = 1;
  for (std::uint32_t i = 0; i < order; ++i) {
    per_anchor *= num_labels;
    if (per_anchor > kMaxFullAssignments)
      throw ConfigError("full lattice exceeds the materialization guard");
  }
  const std::uint32_t anchors = length - order + 1;
  if (per_anchor * anchors > kMaxFullAssignments)
    throw ConfigError("full lattice exceeds the materialization guard");

  SparseLattice lat;
  lat.length_ = length;
  lat.order_ = order;
  lat.num_labels_ = num_labels;
  lat.states_.resize(anchors);

  // All tuples in lexicographic (odometer) order.
  std::vector<State> flat;
  flat.reserve(static_cast<std::size_t>(per_anchor) * order);
  std::vector<State> tup(order, 0);
  for (std::uint64_t n = 0; n < per_anchor; ++n) {
    flat.insert(flat.end(), tup.begin(), tup.end());
    for (std::uint32_t k = order; k-- > 0;) {
      if (++tup[k] < num_labels) break;
      tup[k] = 0;
    }
  }
  for (std::uint32_t a = 0; a < anchors; ++a) lat.states_[a] = flat;
  lat.rebuild_transitions();
  return lat;
}

SparseLattice SparseLattice::from_survivors(std::uint32_t length, std::uint32_t num_labels,
                                            std::uint32_t order,
                                            std::vector<std::vector<State>> flat_states) {
  if (order == 0 || order > length) throw ShapeError("invalid lattice order");
  if (flat_states.size() != length - order + 1)
    throw ShapeError("survivor lists must cover every anchor");

  SparseLattice lat;
  lat.length_ = length;
  lat.order_ = order;
  lat.num_labels_ = num_labels;
  lat.states_ = std::move(flat_states);

  for (std::uint32_t a = 0; a < lat.anchors(); ++a) {
    const auto& flat = lat.states_[a];
    if (flat.empty())
      throw BrokenLatticeError("anchor " + std::to_string(a) + " has no assignments", a);
    if (flat.size() % order != 0)
      throw DataError("survivor list length is not a multiple of the order");
    const std::uint32_t n = lat.count(a);
    for (std::uint32_t i = 0; i < n; ++i) {
      for (State s : lat.tuple(a, i))
        if (s >= num_labels) throw DataError("survivor state exceeds num_labels");
      if (i > 0 && !tuple_less(lat.tuple(a, i - 1), lat.tuple(a, i)))
        throw DataError("survivor tuples must be sorted and unique");
    }
  }
  lat.rebuild_transitions();
  return lat;
}

void SparseLattice::rebuild_transitions() {
  transitions_.assign(anchors() > 0 ? anchors() - 1 : 0, {});
  for (std::uint32_t p = 0; p + 1 < anchors(); ++p) {
    const std::uint32_t nl = count(p), nr = count(p + 1);
    auto& out = transitions_[p];
    if (order_ == 1) {
      // No overlap constraint: all pairs.
      out.reserve(static_cast<std::size_t>(nl) * nr);
      for (std::uint32_t l = 0; l < nl; ++l)
        for (std::uint32_t r = 0; r < nr; ++r) out.emplace_back(l, r);
      continue;
    }
    // Both sides are sorted lexicographically, so for each left tuple the
    // compatible right tuples (sharing its d-1 suffix as prefix) form a
    // contiguous run locatable by binary search.
    for (std::uint32_t l = 0; l < nl; ++l) {
      std::span<const State> suffix = tuple(p, l).subspan(1);
      std::uint32_t lo = 0, hi = nr;
      // First right index with prefix >= suffix.
      while (lo < hi) {
        std::uint32_t mid = (lo + hi) / 2;
        std::span<const State> pre = tuple(p + 1, mid).first(order_ - 1);
        if (std::lexicographical_compare(pre.begin(), pre.end(), suffix.begin(), suffix.end()))
          lo = mid + 1;
        else
          hi = mid;
      }
      for (std::uint32_t r = lo; r < nr; ++r) {
        if (!tuple_eq(tuple(p + 1, r).first(order_ - 1), suffix)) break;
        out.emplace_back(l, r);
      }
    }
  }
}

std::uint32_t SparseLattice::find(std::uint32_t anchor, std::span<const State> t) const {
  const std::uint32_t n = count(anchor);
  std::uint32_t lo = 0, hi = n;
  while (lo < hi) {
    std::uint32_t mid = (lo + hi) / 2;
    if (tuple_less(tuple(anchor, mid), t))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < n && tuple_eq(tuple(anchor, lo), t)) return lo;
  return npos;
}

bool SparseLattice::contains(const Output& output) const {
  if (output.size() != length_) throw ShapeError("output length does not match lattice");
  std::uint32_t prev = npos;
  for (std::uint32_t a = 0; a < anchors(); ++a) {
    std::span<const State> t(output.data() + a, order_);
    std::uint32_t idx = find(a, t);
    if (idx == npos) return false;
    if (a > 0) {
      const auto& trans = transitions_[a - 1];
      if (!std::binary_search(trans.begin(), trans.end(), Transition{prev, idx}))
        return false;
    }
    prev = idx;
  }
  return true;
}

double SparseLattice::density() const {
  double full_per_anchor = std::pow(static_cast<double>(num_labels_), order_);
  return static_cast<double>(total_assignments()) /
         (static_cast<double>(anchors()) * full_per_anchor);
}

std::uint64_t SparseLattice::total_assignments() const {
  std::uint64_t n = 0;
  for (std::uint32_t a = 0; a < anchors(); ++a) n += count(a);
  return n;
}

std::uint64_t SparseLattice::total_transitions() const {
  std::uint64_t n = 0;
  for (const auto& t : transitions_) n += t.size();
  return n;
}

SparseLattice expand(const SparseLattice& lat) {
  const std::uint32_t d = lat.order();
  if (d + 1 > lat.length())
    throw ShapeError("cannot expand: order would exceed output length");

  std::vector<std::vector<State>> flat(lat.anchors() - 1);
  // Transitions are sorted by (left, right) index, which for compatible
  // tuples is exactly the lexicographic order of the concatenated
  // (d+1)-grams, so each anchor's list comes out sorted.
  for (std::uint32_t p = 0; p + 1 < lat.anchors(); ++p) {
    const auto& trans = lat.transitions(p);
    if (trans.empty())
      throw BrokenLatticeError(
          "expansion empties anchor " + std::to_string(p) + ": no transitions survive", p);
    auto& dst = flat[p];
    dst.reserve(trans.size() * (d + 1));
    for (const Transition& t : trans) {
      std::span<const State> left = lat.tuple(p, t.first);
      dst.insert(dst.end(), left.begin(), left.end());
      dst.push_back(lat.tuple(p + 1, t.second).back());
    }
  }
  return SparseLattice::from_survivors(lat.length(), lat.num_labels(), d + 1,
                                       std::move(flat));
}

SparseLattice refine(const SparseLattice& lat, const StateHierarchy& h) {
  if (lat.order() != 1)
    throw ConfigError("refine applies to order-1 lattices only");
  if (h.coarse_labels != lat.num_labels())
    throw ConfigError("hierarchy coarse alphabet does not match the lattice");
  h.validate();

  std::vector<std::vector<State>> flat(lat.anchors());
  for (std::uint32_t a = 0; a < lat.anchors(); ++a) {
    std::vector<State> fine;
    for (std::uint32_t i = 0; i < lat.count(a); ++i) {
      State coarse = lat.tuple(a, i)[0];
      const auto& kids = h.children[coarse];
      fine.insert(fine.end(), kids.begin(), kids.end());
    }
    std::sort(fine.begin(), fine.end());
    flat[a] = std::move(fine);
  }
  return SparseLattice::from_survivors(lat.length(), h.fine_labels, 1, std::move(flat));
}

SparseLattice filter_assignments(const SparseLattice& lat,
                                 const std::vector<std::vector<char>>& keep) {
  std::vector<std::vector<State>> flat(lat.anchors());
  for (std::uint32_t a = 0; a < lat.anchors(); ++a) {
    auto& dst = flat[a];
    for (std::uint32_t i = 0; i < lat.count(a); ++i) {
      if (!keep[a][i]) continue;
      std::span<const State> t = lat.tuple(a, i);
      dst.insert(dst.end(), t.begin(), t.end());
    }
    if (dst.empty())
      throw BrokenLatticeError(
          "filtering empties anchor " + std::to_string(a), a);
  }
  return SparseLattice::from_survivors(lat.length(), lat.num_labels(), lat.order(),
                                       std::move(flat));
}

}  // namespace cascade
