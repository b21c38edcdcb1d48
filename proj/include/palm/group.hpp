#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "palm/rng.hpp"

namespace palm {

enum class GroupKind { Finite, Torus };

/// A location. For finite groups only `index` is meaningful; for tori only
/// `coords` (always reduced to [0, L) per axis).
struct GroupElement {
  int index = -1;
  std::vector<double> coords;
};

/// A compact group: either a finite group given by its Cayley table (Haar =
/// counting measure) or a flat torus R^d mod L (Haar = volume). Cheap to
/// copy; immutable after construction. All supported groups are unimodular.
class Group {
 public:
  static Group cyclic(int n) {
    if (n <= 0) throw std::invalid_argument("cyclic: n must be positive");
    std::vector<std::vector<int>> table(n, std::vector<int>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) table[i][j] = (i + j) % n;
    return from_table(std::move(table));
  }

  /// The symmetric group on three symbols, the smallest non-Abelian group.
  /// Element i is the permutation perms()[i]; composition is (st)(x) = s(t(x)).
  static Group symmetric3() {
    const auto perms = s3_perms();
    const int n = 6;
    std::vector<std::vector<int>> table(n, std::vector<int>(n));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        std::array<int, 3> composed{};
        for (int x = 0; x < 3; ++x) composed[x] = perms[i][perms[j][x]];
        table[i][j] = s3_index(perms, composed);
      }
    }
    return from_table(std::move(table));
  }

  static Group from_table(std::vector<std::vector<int>> cayley) {
    auto impl = std::make_shared<Impl>();
    impl->kind = GroupKind::Finite;
    impl->cayley = std::move(cayley);
    impl->validate_finite();
    return Group(std::move(impl));
  }

  static Group torus(int dim, double side) {
    if (dim <= 0) throw std::invalid_argument("torus: dim must be positive");
    if (!(side > 0.0)) throw std::invalid_argument("torus: side must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = GroupKind::Torus;
    impl->dim = dim;
    impl->side = side;
    impl->abelian = true;
    return Group(std::move(impl));
  }

  GroupKind kind() const { return impl_->kind; }
  bool is_finite() const { return impl_->kind == GroupKind::Finite; }
  bool is_torus() const { return impl_->kind == GroupKind::Torus; }
  bool abelian() const { return impl_->abelian; }
  double modular_delta() const { return 1.0; }

  int order() const {
    require_finite();
    return static_cast<int>(impl_->cayley.size());
  }
  int dim() const {
    require_torus();
    return impl_->dim;
  }
  double side() const {
    require_torus();
    return impl_->side;
  }
  double haar_total() const {
    return is_finite() ? static_cast<double>(impl_->cayley.size())
                       : std::pow(impl_->side, impl_->dim);
  }

  /// Comparison tolerance for torus coordinates.
  double coord_tol() const { return is_torus() ? 1e-9 * impl_->side : 0.0; }

  GroupElement identity() const {
    if (is_finite()) return element(impl_->identity);
    GroupElement e;
    e.coords.assign(impl_->dim, 0.0);
    return e;
  }

  GroupElement element(int index) const {
    require_finite();
    check_index(index);
    GroupElement g;
    g.index = index;
    return g;
  }

  GroupElement point(std::vector<double> coords) const {
    require_torus();
    if (static_cast<int>(coords.size()) != impl_->dim)
      throw std::invalid_argument("point: dimension mismatch");
    for (auto& c : coords) c = wrap(c);
    GroupElement g;
    g.coords = std::move(coords);
    return g;
  }

  GroupElement compose(const GroupElement& s, const GroupElement& t) const {
    if (is_finite()) {
      check_index(s.index);
      check_index(t.index);
      return element(impl_->cayley[s.index][t.index]);
    }
    check_coords(s);
    check_coords(t);
    std::vector<double> out(impl_->dim);
    for (int i = 0; i < impl_->dim; ++i) out[i] = wrap(s.coords[i] + t.coords[i]);
    GroupElement g;
    g.coords = std::move(out);
    return g;
  }

  GroupElement inverse(const GroupElement& t) const {
    if (is_finite()) {
      check_index(t.index);
      return element(impl_->inverse[t.index]);
    }
    check_coords(t);
    std::vector<double> out(impl_->dim);
    for (int i = 0; i < impl_->dim; ++i) out[i] = wrap(-t.coords[i]);
    GroupElement g;
    g.coords = std::move(out);
    return g;
  }

  bool equal(const GroupElement& a, const GroupElement& b) const {
    if (is_finite()) return a.index == b.index;
    check_coords(a);
    check_coords(b);
    const double tol = coord_tol();
    for (int i = 0; i < impl_->dim; ++i)
      if (wrapped_abs(a.coords[i] - b.coords[i]) > tol) return false;
    return true;
  }

  /// Wrapped Euclidean distance on the torus.
  double distance(const GroupElement& a, const GroupElement& b) const {
    require_torus();
    check_coords(a);
    check_coords(b);
    double sq = 0.0;
    for (int i = 0; i < impl_->dim; ++i) {
      const double d = wrapped_abs(a.coords[i] - b.coords[i]);
      sq += d * d;
    }
    return std::sqrt(sq);
  }

  /// Reduce a torus coordinate to [0, L).
  double wrap(double x) const {
    const double L = impl_->side;
    double r = std::fmod(x, L);
    if (r < 0.0) r += L;
    if (r >= L) r = 0.0;  // guards fmod landing exactly on L after the add
    return r;
  }

  /// Signed representative of x in (-L/2, L/2].
  double centered(double x) const {
    const double L = impl_->side;
    double r = wrap(x);
    if (r > L / 2.0) r -= L;
    return r;
  }

  double wrapped_abs(double diff) const {
    const double L = impl_->side;
    double d = std::fmod(std::abs(diff), L);
    return std::min(d, L - d);
  }

  bool same_as(const Group& other) const {
    if (impl_ == other.impl_) return true;
    if (impl_->kind != other.impl_->kind) return false;
    if (is_torus())
      return impl_->dim == other.impl_->dim && impl_->side == other.impl_->side;
    return impl_->cayley == other.impl_->cayley;
  }

  std::string describe() const {
    if (is_torus())
      return "torus(d=" + std::to_string(impl_->dim) +
             ",L=" + std::to_string(impl_->side) + ")";
    return "finite(n=" + std::to_string(impl_->cayley.size()) + ")";
  }

  static std::array<std::array<int, 3>, 6> s3_perms() {
    return {{{0, 1, 2}, {1, 0, 2}, {2, 1, 0}, {0, 2, 1}, {1, 2, 0}, {2, 0, 1}}};
  }

 private:
  struct Impl {
    GroupKind kind = GroupKind::Finite;
    std::vector<std::vector<int>> cayley;
    std::vector<int> inverse;
    int identity = -1;
    bool abelian = true;
    int dim = 0;
    double side = 0.0;

    void validate_finite() {
      const int n = static_cast<int>(cayley.size());
      if (n == 0) throw std::invalid_argument("group table: empty");
      for (const auto& row : cayley) {
        if (static_cast<int>(row.size()) != n)
          throw std::invalid_argument("group table: not square");
        for (int v : row)
          if (v < 0 || v >= n)
            throw std::invalid_argument("group table: entry out of range");
      }
      identity = -1;
      for (int e = 0; e < n; ++e) {
        bool ok = true;
        for (int i = 0; i < n; ++i)
          if (cayley[e][i] != i || cayley[i][e] != i) {
            ok = false;
            break;
          }
        if (ok) {
          identity = e;
          break;
        }
      }
      if (identity < 0) throw std::invalid_argument("group table: no identity");
      inverse.assign(n, -1);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
          if (cayley[i][j] == identity && cayley[j][i] == identity) {
            inverse[i] = j;
            break;
          }
        if (inverse[i] < 0) throw std::invalid_argument("group table: missing inverse");
      }
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            if (cayley[cayley[a][b]][c] != cayley[a][cayley[b][c]])
              throw std::invalid_argument("group table: not associative");
      abelian = true;
      for (int a = 0; a < n && abelian; ++a)
        for (int b = 0; b < n; ++b)
          if (cayley[a][b] != cayley[b][a]) {
            abelian = false;
            break;
          }
    }
  };

  explicit Group(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static int s3_index(const std::array<std::array<int, 3>, 6>& perms,
                      const std::array<int, 3>& p) {
    for (int i = 0; i < 6; ++i)
      if (perms[i][0] == p[0] && perms[i][1] == p[1] && perms[i][2] == p[2]) return i;
    throw std::logic_error("s3_index: not a permutation");
  }

  void require_finite() const {
    if (!is_finite()) throw std::invalid_argument("operation requires a finite group");
  }
  void require_torus() const {
    if (!is_torus()) throw std::invalid_argument("operation requires a torus group");
  }
  void check_index(int index) const {
    if (index < 0 || index >= static_cast<int>(impl_->cayley.size()))
      throw std::invalid_argument("element index out of range");
  }
  void check_coords(const GroupElement& g) const {
    if (static_cast<int>(g.coords.size()) != impl_->dim)
      throw std::invalid_argument("element dimension mismatch");
  }

  std::shared_ptr<const Impl> impl_;
};

/// A lambda-continuity set: a subset of a finite group, or a finite disjoint
/// union of half-open axis-aligned boxes on a torus. Boxes are stored
/// non-wrapping (wrapping input is split at construction) and must be
/// pairwise disjoint.
class MeasurableSet {
 public:
  struct Box {
    std::vector<double> corner;  // in [0, L)^d
    std::vector<double> extent;  // per axis, in (0, L]
  };

  static MeasurableSet of_elements(const Group& g, std::vector<int> indices) {
    if (!g.is_finite())
      throw std::invalid_argument("of_elements: finite group required");
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    for (int i : indices) g.element(i);  // range check
    MeasurableSet s(g);
    s.elements_ = std::move(indices);
    return s;
  }

  static MeasurableSet all(const Group& g) {
    if (g.is_finite()) {
      std::vector<int> idx(g.order());
      std::iota(idx.begin(), idx.end(), 0);
      return of_elements(g, std::move(idx));
    }
    return box(g, std::vector<double>(g.dim(), 0.0),
               std::vector<double>(g.dim(), g.side()));
  }

  static MeasurableSet box(const Group& g, std::vector<double> corner,
                           std::vector<double> extent) {
    return boxes(g, {{std::move(corner), std::move(extent)}});
  }

  static MeasurableSet boxes(const Group& g, std::vector<Box> raw) {
    if (!g.is_torus()) throw std::invalid_argument("boxes: torus group required");
    MeasurableSet s(g);
    for (auto& b : raw) {
      if (static_cast<int>(b.corner.size()) != g.dim() ||
          static_cast<int>(b.extent.size()) != g.dim())
        throw std::invalid_argument("box: dimension mismatch");
      for (double e : b.extent)
        if (!(e > 0.0) || e > g.side())
          throw std::invalid_argument("box: extent must lie in (0, L]");
      append_split(g, b, s.boxes_);
    }
    s.check_disjoint();
    return s;
  }

  const Group& group() const { return group_; }
  const std::vector<int>& elements() const { return elements_; }
  const std::vector<Box>& box_list() const { return boxes_; }

  bool contains(const GroupElement& x) const {
    if (group_.is_finite())
      return std::binary_search(elements_.begin(), elements_.end(), x.index);
    for (const auto& b : boxes_) {
      bool in = true;
      for (int i = 0; i < group_.dim(); ++i) {
        const double c = x.coords[i];
        if (c < b.corner[i] || c >= b.corner[i] + b.extent[i]) {
          in = false;
          break;
        }
      }
      if (in) return true;
    }
    return false;
  }

  bool empty() const {
    return group_.is_finite() ? elements_.empty() : boxes_.empty();
  }

 private:
  explicit MeasurableSet(Group g) : group_(std::move(g)) {}

  static void append_split(const Group& g, const Box& b, std::vector<Box>& out) {
    // Split a possibly wrapping box into non-wrapping pieces, axis by axis.
    const int d = g.dim();
    const double L = g.side();
    std::vector<std::vector<std::pair<double, double>>> axis_pieces(d);
    for (int i = 0; i < d; ++i) {
      double c = g.wrap(b.corner[i]);
      double e = b.extent[i];
      if (c + e <= L + 1e-12 * L) {
        axis_pieces[i].push_back({c, std::min(e, L - c)});
      } else {
        axis_pieces[i].push_back({c, L - c});
        axis_pieces[i].push_back({0.0, e - (L - c)});
      }
    }
    std::vector<int> pick(d, 0);
    for (;;) {
      Box piece;
      piece.corner.resize(d);
      piece.extent.resize(d);
      for (int i = 0; i < d; ++i) {
        piece.corner[i] = axis_pieces[i][pick[i]].first;
        piece.extent[i] = axis_pieces[i][pick[i]].second;
      }
      out.push_back(std::move(piece));
      int axis = d - 1;
      while (axis >= 0) {
        if (++pick[axis] < static_cast<int>(axis_pieces[axis].size())) break;
        pick[axis] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
  }

  void check_disjoint() const {
    for (std::size_t i = 0; i < boxes_.size(); ++i)
      for (std::size_t j = i + 1; j < boxes_.size(); ++j) {
        bool overlap = true;
        for (int k = 0; k < group_.dim(); ++k) {
          const double lo = std::max(boxes_[i].corner[k], boxes_[j].corner[k]);
          const double hi = std::min(boxes_[i].corner[k] + boxes_[i].extent[k],
                                     boxes_[j].corner[k] + boxes_[j].extent[k]);
          if (hi - lo <= group_.coord_tol()) {
            overlap = false;
            break;
          }
        }
        if (overlap) throw std::invalid_argument("overlapping boxes in set");
      }
  }

  Group group_;
  std::vector<int> elements_;  // finite case, sorted
  std::vector<Box> boxes_;     // torus case, disjoint, non-wrapping
};

inline GroupElement compose(const Group& g, const GroupElement& s,
                            const GroupElement& t) {
  return g.compose(s, t);
}

inline GroupElement inverse(const Group& g, const GroupElement& t) {
  return g.inverse(t);
}

/// Left translate tC = {tc : c in C}. Haar measure is preserved.
inline MeasurableSet act_on_set(const Group& g, const GroupElement& t,
                                const MeasurableSet& C) {
  if (!g.same_as(C.group())) throw std::invalid_argument("act_on_set: group mismatch");
  if (g.is_finite()) {
    std::vector<int> idx;
    idx.reserve(C.elements().size());
    for (int i : C.elements()) idx.push_back(g.compose(t, g.element(i)).index);
    return MeasurableSet::of_elements(g, std::move(idx));
  }
  std::vector<MeasurableSet::Box> shifted;
  shifted.reserve(C.box_list().size());
  for (const auto& b : C.box_list()) {
    MeasurableSet::Box nb = b;
    for (int i = 0; i < g.dim(); ++i) nb.corner[i] = g.wrap(nb.corner[i] + t.coords[i]);
    shifted.push_back(std::move(nb));
  }
  return MeasurableSet::boxes(g, std::move(shifted));
}

/// Haar measure: cardinality (finite) or total volume (torus).
inline double haar(const Group& g, const MeasurableSet& C) {
  if (!g.same_as(C.group())) throw std::invalid_argument("haar: group mismatch");
  if (g.is_finite()) return static_cast<double>(C.elements().size());
  double total = 0.0;
  for (const auto& b : C.box_list()) {
    double v = 1.0;
    for (double e : b.extent) v *= e;
    total += v;
  }
  return total;
}

/// Draw from lambda( . | C).
inline GroupElement uniform_sample(const Group& g, const MeasurableSet& C, Rng& rng) {
  if (!g.same_as(C.group()))
    throw std::invalid_argument("uniform_sample: group mismatch");
  if (g.is_finite()) {
    if (C.elements().empty()) throw std::invalid_argument("uniform_sample: null set");
    const auto& idx = C.elements();
    return g.element(idx[rng.uniform_below(idx.size())]);
  }
  if (haar(g, C) <= 0.0) throw std::invalid_argument("uniform_sample: null set");
  std::vector<double> vols;
  vols.reserve(C.box_list().size());
  for (const auto& b : C.box_list()) {
    double v = 1.0;
    for (double e : b.extent) v *= e;
    vols.push_back(v);
  }
  const auto& b = C.box_list()[rng.weighted_index(vols)];
  std::vector<double> coords(g.dim());
  for (int i = 0; i < g.dim(); ++i)
    coords[i] = b.corner[i] + rng.uniform() * b.extent[i];
  return g.point(std::move(coords));
}

}  // namespace palm
