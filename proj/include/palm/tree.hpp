#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "palm/measure.hpp"

namespace palm {

/// Family forest over a planar point pattern. The mother of a point is the
/// first point hit when sweeping a unit-length horizontal interval centered
/// at the point upward; sisters are ordered by x coordinate, oldest first
/// (smallest x).
///
/// Window mode treats the pattern as a finite observation of an infinite
/// plane: every query also reports whether unknown points outside the window
/// could change the answer. Navigation (successor/predecessor) refuses to
/// answer (returns nullopt) rather than rely on an uncertain relation.
/// Torus mode wraps coordinates; relations are complete but mother chains can
/// cycle, which navigation also reports as nullopt.
class PlanarForest {
 public:
  static constexpr double kHalfWidth = 0.5;

  PlanarForest(const PointMeasure& xi, const Mark::Window& window)
      : group_(xi.group()), windowed_(true), window_(window) {
    init(xi);
  }

  explicit PlanarForest(const PointMeasure& xi)
      : group_(xi.group()), windowed_(false) {
    init(xi);
  }

  int size() const { return static_cast<int>(xs_.size()); }

  /// Index of the atom at the group identity, or -1.
  int origin() const { return origin_; }

  int index_of(const GroupElement& p) const {
    const double tol = group_.coord_tol() + 1e-12;
    for (int i = 0; i < size(); ++i)
      if (std::abs(dx(p_x(p), i)) <= tol && std::abs(dy_signed(p_y(p), i)) <= tol)
        return i;
    return -1;
  }

  GroupElement location(int i) const { return locations_[i]; }

  struct MotherResult {
    std::optional<int> mother;
    bool certain = false;
  };

  const MotherResult& mother(int i) const {
    auto& slot = mother_cache_[i];
    if (!slot) slot = compute_mother(i);
    return *slot;
  }

  struct DaughterResult {
    std::vector<int> daughters;  // oldest (smallest relative x) first
    bool certain = false;
  };

  const DaughterResult& daughters(int i) const {
    auto& slot = daughter_cache_[i];
    if (!slot) slot = compute_daughters(i);
    return *slot;
  }

  /// Next point in the depth-first family order: oldest daughter; else oldest
  /// younger sister; else oldest younger sister of the youngest ancestor that
  /// has one. nullopt when the answer would depend on unknown points
  /// (window mode) or the ancestor walk cycles (torus mode).
  std::optional<int> successor(int i) const {
    const auto& d = daughters(i);
    if (!d.certain) return std::nullopt;
    if (!d.daughters.empty()) return d.daughters.front();
    int cur = i;
    std::set<int> visited{i};
    for (;;) {
      const auto& m = mother(cur);
      if (!m.certain || !m.mother) return std::nullopt;
      const int mom = *m.mother;
      if (visited.count(mom)) return std::nullopt;
      const auto& sisters = daughters(mom);
      if (!sisters.certain) return std::nullopt;
      const double rx = rel_x(cur, mom);
      std::optional<int> best;
      double best_rx = 0.0;
      for (int s : sisters.daughters) {
        const double srx = rel_x(s, mom);
        if (srx > rx && (!best || srx < best_rx)) {
          best = s;
          best_rx = srx;
        }
      }
      if (best) return best;
      visited.insert(mom);
      cur = mom;
    }
  }

  /// Inverse move: mother if no older sister; else the last point in the
  /// youngest-daughter offspring line of the youngest older sister.
  std::optional<int> predecessor(int i) const {
    const auto& m = mother(i);
    if (!m.certain || !m.mother) return std::nullopt;
    const int mom = *m.mother;
    const auto& sisters = daughters(mom);
    if (!sisters.certain) return std::nullopt;
    const double rx = rel_x(i, mom);
    std::optional<int> older;
    double older_rx = 0.0;
    for (int s : sisters.daughters) {
      const double srx = rel_x(s, mom);
      if (srx < rx && (!older || srx > older_rx)) {
        older = s;
        older_rx = srx;
      }
    }
    if (!older) return mom;
    int cur = *older;
    std::set<int> visited{cur};
    for (;;) {
      const auto& d = daughters(cur);
      if (!d.certain) return std::nullopt;
      if (d.daughters.empty()) return cur;
      cur = d.daughters.back();  // youngest daughter: largest relative x
      if (visited.count(cur)) return std::nullopt;
      visited.insert(cur);
    }
  }

  /// Signed x offset of atom j relative to atom i (wrapped on the torus).
  double rel_x(int j, int i) const { return dx(xs_[j], i); }

 private:
  void init(const PointMeasure& xi) {
    if (!group_.is_torus() || group_.dim() != 2)
      throw std::invalid_argument("planar forest: 2-d torus group required");
    if (!xi.simple())
      throw std::invalid_argument("planar forest: simple point pattern required");
    const auto& atoms = xi.atoms();
    xs_.reserve(atoms.size());
    ys_.reserve(atoms.size());
    locations_.reserve(atoms.size());
    for (const auto& a : atoms) {
      // Chart coordinates relative to the origin, exact for configurations
      // well inside the torus.
      xs_.push_back(group_.centered(a.location.coords[0]));
      ys_.push_back(group_.centered(a.location.coords[1]));
      locations_.push_back(a.location);
    }
    mother_cache_.assign(xs_.size(), std::nullopt);
    daughter_cache_.assign(xs_.size(), std::nullopt);
    origin_ = -1;
    const double tol = group_.coord_tol() + 1e-12;
    for (int i = 0; i < size(); ++i)
      if (std::abs(xs_[i]) <= tol && std::abs(ys_[i]) <= tol) {
        origin_ = i;
        break;
      }
  }

  double p_x(const GroupElement& p) const { return group_.centered(p.coords[0]); }
  double p_y(const GroupElement& p) const { return group_.centered(p.coords[1]); }

  // Signed x distance from atom i to coordinate x (torus: wrapped to
  // (-L/2, L/2]; window: plain difference of chart coordinates).
  double dx(double x, int i) const {
    return windowed_ ? x - xs_[i] : group_.centered(x - xs_[i]);
  }
  double dy_signed(double y, int i) const {
    return windowed_ ? y - ys_[i] : group_.centered(y - ys_[i]);
  }
  // Upward sweep distance from atom i to height y; positive or absent.
  std::optional<double> sweep_up(double y, int i) const {
    if (windowed_) {
      const double d = y - ys_[i];
      return d > 0.0 ? std::optional<double>(d) : std::nullopt;
    }
    const double d = group_.wrap(y - ys_[i]);
    return d > 0.0 ? std::optional<double>(d) : std::nullopt;
  }

  bool strip_inside_window(int i) const {
    return xs_[i] - kHalfWidth >= window_.lo[0] &&
           xs_[i] + kHalfWidth <= window_.hi[0];
  }

  MotherResult compute_mother(int i) const {
    MotherResult res;
    std::optional<int> best;
    double best_dy = 0.0;
    for (int j = 0; j < size(); ++j) {
      if (j == i) continue;
      if (std::abs(dx(xs_[j], i)) > kHalfWidth) continue;
      const auto d = sweep_up(ys_[j], i);
      if (!d) continue;
      if (!best || *d < best_dy ||
          (*d == best_dy && (xs_[j] < xs_[*best] ||
                             (xs_[j] == xs_[*best] && j < *best)))) {
        best = j;
        best_dy = *d;
      }
    }
    res.mother = best;
    if (windowed_)
      // An out-of-window point could intercept the sweep unless the whole
      // strip is observed; an unfound mother may exist above the window.
      res.certain = best.has_value() && strip_inside_window(i);
    else
      res.certain = best.has_value();
    return res;
  }

  DaughterResult compute_daughters(int i) const {
    DaughterResult res;
    res.certain = true;
    for (int j = 0; j < size(); ++j) {
      if (j == i) continue;
      if (std::abs(dx(xs_[j], i)) > kHalfWidth) continue;
      if (!sweep_up(ys_[i], j)) continue;  // j must lie strictly below i
      const auto& m = mother(j);
      if (!m.certain) {
        if (m.mother && *m.mother != i) {
          // Blocked by a known point below i; outside points cannot unblock.
          continue;
        }
        res.certain = false;
        continue;
      }
      if (m.mother && *m.mother == i) res.daughters.push_back(j);
    }
    if (windowed_) {
      if (!strip_inside_window(i)) res.certain = false;
      if (res.certain && !shielded_from_below(i)) res.certain = false;
    }
    std::sort(res.daughters.begin(), res.daughters.end(), [&](int a, int b) {
      const double ra = rel_x(a, i), rb = rel_x(b, i);
      return ra < rb || (ra == rb && a < b);
    });
    return res;
  }

  // Window mode: no unobserved point below the window can be a daughter of i
  // if every x position in i's strip is blocked by some observed point below
  // i. Interval cover check over [x_i - 1/2, x_i + 1/2].
  bool shielded_from_below(int i) const {
    std::vector<std::pair<double, double>> intervals;
    for (int r = 0; r < size(); ++r) {
      if (r == i) continue;
      if (ys_[r] < ys_[i])
        intervals.push_back({xs_[r] - kHalfWidth, xs_[r] + kHalfWidth});
    }
    std::sort(intervals.begin(), intervals.end());
    double covered_to = xs_[i] - kHalfWidth;
    const double need = xs_[i] + kHalfWidth;
    for (const auto& [lo, hi] : intervals) {
      if (lo > covered_to) return false;
      covered_to = std::max(covered_to, hi);
      if (covered_to >= need) return true;
    }
    return covered_to >= need;
  }

  Group group_;
  bool windowed_ = false;
  Mark::Window window_;
  std::vector<double> xs_, ys_;
  std::vector<GroupElement> locations_;
  int origin_ = -1;
  mutable std::vector<std::optional<MotherResult>> mother_cache_;
  mutable std::vector<std::optional<DaughterResult>> daughter_cache_;
};

/// Raw mother sweep for a point p of the pattern: the atom q != p with
/// minimal positive upward sweep distance among those with |x_q - x_p| <=
/// 1/2; ties broken toward smaller x. nullopt when the sweep exits the
/// window (window mode) or finds no candidate (torus mode).
inline std::optional<GroupElement> tree_mother(const PointMeasure& xi,
                                               const GroupElement& p,
                                               const Mark::Window& window) {
  PlanarForest forest(xi, window);
  const int i = forest.index_of(p);
  if (i < 0) throw std::invalid_argument("tree_mother: p is not an atom");
  const auto& m = forest.mother(i);
  if (!m.mother) return std::nullopt;
  return forest.location(*m.mother);
}

inline std::optional<GroupElement> tree_mother(const PointMeasure& xi,
                                               const GroupElement& p) {
  PlanarForest forest(xi);
  const int i = forest.index_of(p);
  if (i < 0) throw std::invalid_argument("tree_mother: p is not an atom");
  const auto& m = forest.mother(i);
  if (!m.mother) return std::nullopt;
  return forest.location(*m.mother);
}

namespace detail {

inline PlanarForest make_forest(const Configuration& c) {
  const auto& pm = std::get<PointMeasure>(c.measure);
  if (const Mark* w = c.mark.find(Mark::Kind::WindowBox))
    return PlanarForest(pm, w->window());
  return PlanarForest(pm);
}

}  // namespace detail

/// One step of the family-order point shift; nullopt = censored.
inline std::optional<GroupElement> tree_shift(const Configuration& c) {
  PlanarForest forest = detail::make_forest(c);
  if (forest.origin() < 0)
    throw std::invalid_argument("tree_shift: origin not in support");
  const auto s = forest.successor(forest.origin());
  if (!s) return std::nullopt;
  return forest.location(*s);
}

/// The reverse step; nullopt = censored.
inline std::optional<GroupElement> tree_shift_reverse(const Configuration& c) {
  PlanarForest forest = detail::make_forest(c);
  if (forest.origin() < 0)
    throw std::invalid_argument("tree_shift_reverse: origin not in support");
  const auto s = forest.predecessor(forest.origin());
  if (!s) return std::nullopt;
  return forest.location(*s);
}

}  // namespace palm
