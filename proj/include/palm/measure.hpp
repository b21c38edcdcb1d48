#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "palm/group.hpp"
#include "palm/rng.hpp"

namespace palm {

struct Atom {
  GroupElement location;
  double weight = 0.0;
};

/// A finite atomic measure. Construction canonicalizes: atoms are sorted by
/// location and near-duplicate locations (within 1e-9 * L on tori, exactly
/// on finite groups) are merged by summing weights. `simple()` means every
/// weight is exactly 1 after merging.
class PointMeasure {
 public:
  PointMeasure(Group g, std::vector<Atom> atoms) : group_(std::move(g)) {
    for (const auto& a : atoms) {
      if (!(a.weight > 0.0))
        throw std::invalid_argument("point measure: weights must be positive");
      check_location(a.location);
    }
    std::sort(atoms.begin(), atoms.end(), [this](const Atom& a, const Atom& b) {
      return location_less(a.location, b.location);
    });
    const double tol = group_.coord_tol();
    for (auto& a : atoms) {
      if (!atoms_.empty() && locations_close(atoms_.back().location, a.location, tol))
        atoms_.back().weight += a.weight;
      else
        atoms_.push_back(std::move(a));
    }
    simple_ = true;
    for (const auto& a : atoms_)
      if (a.weight != 1.0) {
        simple_ = false;
        break;
      }
  }

  static PointMeasure empty(Group g) { return PointMeasure(std::move(g), {}); }

  /// Counting measure on all elements of a finite group (Haar).
  static PointMeasure counting(const Group& g) {
    std::vector<Atom> atoms;
    atoms.reserve(g.order());
    for (int i = 0; i < g.order(); ++i) atoms.push_back({g.element(i), 1.0});
    return PointMeasure(g, std::move(atoms));
  }

  /// Weight vector indexed by element for a finite group; zero weights skipped.
  static PointMeasure from_weights(const Group& g, const std::vector<double>& w) {
    if (static_cast<int>(w.size()) != g.order())
      throw std::invalid_argument("from_weights: size mismatch");
    std::vector<Atom> atoms;
    for (int i = 0; i < g.order(); ++i)
      if (w[i] != 0.0) atoms.push_back({g.element(i), w[i]});
    return PointMeasure(g, std::move(atoms));
  }

  const Group& group() const { return group_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  bool simple() const { return simple_; }

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.weight;
    return m;
  }

  double mass_at(const GroupElement& x) const {
    const double tol = group_.coord_tol();
    for (const auto& a : atoms_)
      if (locations_close(a.location, x, tol)) return a.weight;
    return 0.0;
  }

  bool has_atom_at(const GroupElement& x) const { return mass_at(x) > 0.0; }

  double mass_in(const MeasurableSet& C) const {
    double m = 0.0;
    for (const auto& a : atoms_)
      if (C.contains(a.location)) m += a.weight;
    return m;
  }

 private:
  void check_location(const GroupElement& x) const {
    if (group_.is_finite())
      group_.element(x.index);
    else if (static_cast<int>(x.coords.size()) != group_.dim())
      throw std::invalid_argument("point measure: location dimension mismatch");
  }

  bool location_less(const GroupElement& a, const GroupElement& b) const {
    if (group_.is_finite()) return a.index < b.index;
    return a.coords < b.coords;
  }

  bool locations_close(const GroupElement& a, const GroupElement& b, double tol) const {
    if (group_.is_finite()) return a.index == b.index;
    for (int i = 0; i < group_.dim(); ++i)
      if (group_.wrapped_abs(a.coords[i] - b.coords[i]) > tol) return false;
    return true;
  }

  Group group_;
  std::vector<Atom> atoms_;
  bool simple_ = true;
};

/// A gridded nonnegative density on a torus; cells are half-open boxes of
/// equal size, values are densities (mass per unit volume), stored row-major
/// with the last axis fastest.
class DensityMeasure {
 public:
  DensityMeasure(Group g, std::vector<int> shape, std::vector<double> values)
      : group_(std::move(g)), shape_(std::move(shape)), values_(std::move(values)) {
    if (!group_.is_torus())
      throw std::invalid_argument("density measure: torus group required");
    if (static_cast<int>(shape_.size()) != group_.dim())
      throw std::invalid_argument("density measure: shape dimension mismatch");
    std::size_t cells = 1;
    for (int s : shape_) {
      if (s <= 0) throw std::invalid_argument("density measure: bad shape");
      cells *= static_cast<std::size_t>(s);
    }
    if (values_.size() != cells)
      throw std::invalid_argument("density measure: value count mismatch");
    for (double v : values_)
      if (v < 0.0 || !std::isfinite(v))
        throw std::invalid_argument("density measure: values must be >= 0");
  }

  static DensityMeasure constant(const Group& g, const std::vector<int>& shape,
                                 double value) {
    std::size_t cells = 1;
    for (int s : shape) cells *= static_cast<std::size_t>(s);
    return DensityMeasure(g, shape, std::vector<double>(cells, value));
  }

  const Group& group() const { return group_; }
  const std::vector<int>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }

  double cell_volume() const {
    double v = 1.0;
    for (int s : shape_) v *= group_.side() / s;
    return v;
  }

  double total_mass() const {
    double sum = 0.0;
    for (double v : values_) sum += v;
    return sum * cell_volume();
  }

  /// Exact mass of a box union under the piecewise-constant density.
  double mass_in(const MeasurableSet& C) const {
    double m = 0.0;
    for (const auto& b : C.box_list()) m += box_mass(b.corner, b.extent);
    return m;
  }

  /// Translate the measure by t (pushforward), re-binning fractional shifts
  /// by exact cell overlap, one axis at a time. Mass is conserved.
  DensityMeasure shifted(const GroupElement& t) const {
    std::vector<double> vals = values_;
    const int d = group_.dim();
    for (int axis = 0; axis < d; ++axis)
      vals = shift_axis(vals, axis, t.coords[axis]);
    return DensityMeasure(group_, shape_, std::move(vals));
  }

  std::size_t cell_index(const std::vector<int>& idx) const {
    std::size_t flat = 0;
    for (int i = 0; i < static_cast<int>(shape_.size()); ++i)
      flat = flat * shape_[i] + idx[i];
    return flat;
  }

  /// Center coordinates of a flat cell index.
  std::vector<double> cell_center(std::size_t flat) const {
    const int d = group_.dim();
    std::vector<double> c(d);
    for (int i = d - 1; i >= 0; --i) {
      const int n = shape_[i];
      c[i] = (static_cast<double>(flat % n) + 0.5) * group_.side() / n;
      flat /= n;
    }
    return c;
  }

 private:
  double box_mass(const std::vector<double>& corner,
                  const std::vector<double>& extent) const {
    // Recursive per-axis overlap of [corner, corner+extent) with the grid.
    const int d = group_.dim();
    std::vector<std::vector<std::pair<int, double>>> axis_overlaps(d);
    for (int i = 0; i < d; ++i) {
      const int n = shape_[i];
      const double cell = group_.side() / n;
      const double lo = corner[i];
      const double hi = corner[i] + extent[i];
      const int first = static_cast<int>(std::floor(lo / cell));
      const int last = static_cast<int>(std::ceil(hi / cell));
      for (int k = first; k < last; ++k) {
        const double c0 = k * cell, c1 = (k + 1) * cell;
        const double ov = std::min(hi, c1) - std::max(lo, c0);
        if (ov > 0.0) axis_overlaps[i].push_back({((k % n) + n) % n, ov});
      }
    }
    double total = 0.0;
    std::vector<int> pick(d, 0);
    for (;;) {
      double w = 1.0;
      std::vector<int> idx(d);
      for (int i = 0; i < d; ++i) {
        idx[i] = axis_overlaps[i][pick[i]].first;
        w *= axis_overlaps[i][pick[i]].second;
      }
      total += w * values_[cell_index(idx)];
      int axis = d - 1;
      while (axis >= 0) {
        if (++pick[axis] < static_cast<int>(axis_overlaps[axis].size())) break;
        pick[axis] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
    return total;
  }

  std::vector<double> shift_axis(const std::vector<double>& vals, int axis,
                                 double delta) const {
    const int n = shape_[axis];
    const double cell = group_.side() / n;
    const double shift_cells = group_.wrap(delta) / cell;
    const int whole = static_cast<int>(std::floor(shift_cells));
    const double frac = shift_cells - whole;

    std::size_t inner = 1;
    for (int i = axis + 1; i < static_cast<int>(shape_.size()); ++i) inner *= shape_[i];
    std::size_t outer = vals.size() / (inner * n);

    std::vector<double> out(vals.size(), 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (int k = 0; k < n; ++k) {
        const int k_lo = (k + whole) % n;
        const int k_hi = (k + whole + 1) % n;
        for (std::size_t j = 0; j < inner; ++j) {
          const double v = vals[(o * n + k) * inner + j];
          out[(o * n + k_lo) * inner + j] += v * (1.0 - frac);
          out[(o * n + k_hi) * inner + j] += v * frac;
        }
      }
    }
    return out;
  }

  Group group_;
  std::vector<int> shape_;
  std::vector<double> values_;
};

using Measure = std::variant<PointMeasure, DensityMeasure>;

inline const Group& measure_group(const Measure& m) {
  return std::visit([](const auto& x) -> const Group& { return x.group(); }, m);
}

inline double total_mass(const Measure& m) {
  return std::visit([](const auto& x) { return x.total_mass(); }, m);
}

inline double mass_in(const Measure& m, const MeasurableSet& C) {
  return std::visit([&](const auto& x) { return x.mass_in(C); }, m);
}

/// A shiftable auxiliary random element attached to a configuration.
/// Scalar components are left intact by shifts; WindowBox tracks an
/// axis-aligned observation window in origin-relative coordinates and
/// translates with the configuration.
class Mark {
 public:
  enum class Kind { Empty, PointPattern, GridField, Tuple, Scalar, WindowBox };

  struct Window {
    std::vector<double> lo;  // origin-relative, not wrapped
    std::vector<double> hi;
  };

  static Mark empty() { return Mark(); }
  static Mark point_pattern(PointMeasure m) {
    Mark k;
    k.kind_ = Kind::PointPattern;
    k.pattern_ = std::make_shared<PointMeasure>(std::move(m));
    return k;
  }
  static Mark grid_field(DensityMeasure f) {
    Mark k;
    k.kind_ = Kind::GridField;
    k.field_ = std::make_shared<DensityMeasure>(std::move(f));
    return k;
  }
  static Mark tuple(std::vector<Mark> parts) {
    Mark k;
    k.kind_ = Kind::Tuple;
    k.parts_ = std::move(parts);
    return k;
  }
  static Mark scalar(double v) {
    Mark k;
    k.kind_ = Kind::Scalar;
    k.scalar_ = v;
    return k;
  }
  static Mark window_box(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size())
      throw std::invalid_argument("window_box: dimension mismatch");
    Mark k;
    k.kind_ = Kind::WindowBox;
    k.window_ = {std::move(lo), std::move(hi)};
    return k;
  }

  Kind kind() const { return kind_; }
  const PointMeasure& pattern() const { return *pattern_; }
  const DensityMeasure& field() const { return *field_; }
  const std::vector<Mark>& parts() const { return parts_; }
  double scalar_value() const { return scalar_; }
  const Window& window() const { return window_; }

  /// First component of the given kind, searching tuples depth-first.
  const Mark* find(Kind kind) const {
    if (kind_ == kind) return this;
    if (kind_ == Kind::Tuple)
      for (const auto& p : parts_)
        if (const Mark* m = p.find(kind)) return m;
    return nullptr;
  }

 private:
  Kind kind_ = Kind::Empty;
  std::shared_ptr<const PointMeasure> pattern_;
  std::shared_ptr<const DensityMeasure> field_;
  std::vector<Mark> parts_;
  double scalar_ = 0.0;
  Window window_;
};

namespace detail {

inline void check_mark_group(const Mark& mark, const Group& g) {
  switch (mark.kind()) {
    case Mark::Kind::PointPattern:
      if (!mark.pattern().group().same_as(g))
        throw std::invalid_argument("configuration: mark group mismatch");
      return;
    case Mark::Kind::GridField:
      if (!mark.field().group().same_as(g))
        throw std::invalid_argument("configuration: mark group mismatch");
      return;
    case Mark::Kind::Tuple:
      for (const auto& p : mark.parts()) check_mark_group(p, g);
      return;
    default:
      return;  // Empty, Scalar and WindowBox carry no group
  }
}

}  // namespace detail

/// A marked random-measure realization: the pair (X, xi). Both components
/// must reference the same group.
struct Configuration {
  Mark mark;
  Measure measure;

  explicit Configuration(Measure m) : mark(Mark::empty()), measure(std::move(m)) {}
  Configuration(Mark k, Measure m) : mark(std::move(k)), measure(std::move(m)) {
    detail::check_mark_group(mark, group());
  }

  const Group& group() const { return measure_group(measure); }
};

inline PointMeasure shift_point_measure(const GroupElement& t, const PointMeasure& m) {
  const Group& g = m.group();
  std::vector<Atom> atoms;
  atoms.reserve(m.atoms().size());
  for (const auto& a : m.atoms()) atoms.push_back({g.compose(t, a.location), a.weight});
  return PointMeasure(g, std::move(atoms));
}

/// Pushforward t*mu: the atom at s moves to ts (grid translation with
/// wraparound for densities). Total mass is unchanged.
inline Measure shift_measure(const GroupElement& t, const Measure& m) {
  if (std::holds_alternative<PointMeasure>(m))
    return shift_point_measure(t, std::get<PointMeasure>(m));
  return std::get<DensityMeasure>(m).shifted(t);
}

inline Mark shift_mark(const Group& g, const GroupElement& t, const Mark& mark) {
  switch (mark.kind()) {
    case Mark::Kind::Empty:
    case Mark::Kind::Scalar:
      return mark;
    case Mark::Kind::PointPattern:
      return Mark::point_pattern(shift_point_measure(t, mark.pattern()));
    case Mark::Kind::GridField:
      return Mark::grid_field(mark.field().shifted(t));
    case Mark::Kind::WindowBox: {
      Mark::Window w = mark.window();
      for (std::size_t i = 0; i < w.lo.size(); ++i) {
        const double step = g.centered(t.coords[i]);
        w.lo[i] += step;
        w.hi[i] += step;
        if (std::abs(w.lo[i]) > g.side() / 2 || std::abs(w.hi[i]) > g.side() / 2)
          throw std::runtime_error("window_box: drifted past chart range");
      }
      return Mark::window_box(std::move(w.lo), std::move(w.hi));
    }
    case Mark::Kind::Tuple: {
      std::vector<Mark> parts;
      parts.reserve(mark.parts().size());
      for (const auto& p : mark.parts()) parts.push_back(shift_mark(g, t, p));
      return Mark::tuple(std::move(parts));
    }
  }
  throw std::logic_error("shift_mark: unknown kind");
}

/// t(X, xi) = (tX, t xi).
inline Configuration shift_config(const GroupElement& t, const Configuration& c) {
  return Configuration(shift_mark(c.group(), t, c.mark), shift_measure(t, c.measure));
}

struct ConditionalSample {
  GroupElement location;
  bool fallback = false;  // xi(C) = 0: fixed fallback (point mass at identity)
};

/// Draw from xi( . | C). When xi(C) = 0 the fixed fallback distribution
/// (point mass at the identity) is used and the event is flagged.
inline ConditionalSample conditional_sample(const Measure& m, const MeasurableSet& C,
                                            Rng& rng) {
  const Group& g = measure_group(m);
  if (!g.same_as(C.group()))
    throw std::invalid_argument("conditional_sample: group mismatch");
  if (std::holds_alternative<PointMeasure>(m)) {
    const auto& pm = std::get<PointMeasure>(m);
    std::vector<double> weights;
    std::vector<const Atom*> in;
    for (const auto& a : pm.atoms())
      if (C.contains(a.location)) {
        weights.push_back(a.weight);
        in.push_back(&a);
      }
    if (in.empty()) return {g.identity(), true};
    return {in[rng.weighted_index(weights)]->location, false};
  }
  const auto& dm = std::get<DensityMeasure>(m);
  // Cell masses restricted to C: overlap of each box of C with the grid.
  // Sample a (box, cell-overlap) pair by mass, then uniform inside the piece.
  struct Piece {
    std::vector<double> corner, extent;
    double mass;
  };
  std::vector<Piece> pieces;
  const int d = g.dim();
  for (const auto& b : C.box_list()) {
    // Enumerate grid cells overlapping b, in the same manner as mass_in.
    std::vector<std::vector<std::pair<double, double>>> spans(d);
    for (int i = 0; i < d; ++i) {
      const int n = dm.shape()[i];
      const double cell = g.side() / n;
      const double lo = b.corner[i];
      const double hi = b.corner[i] + b.extent[i];
      const int first = static_cast<int>(std::floor(lo / cell));
      const int last = static_cast<int>(std::ceil(hi / cell));
      for (int k = first; k < last; ++k) {
        const double c0 = k * cell, c1 = (k + 1) * cell;
        const double a = std::max(lo, c0), z = std::min(hi, c1);
        if (z - a > 0.0) spans[i].push_back({a, z - a});
      }
    }
    std::vector<int> pick(d, 0);
    if (std::any_of(spans.begin(), spans.end(),
                    [](const auto& s) { return s.empty(); }))
      continue;
    for (;;) {
      Piece p;
      p.corner.resize(d);
      p.extent.resize(d);
      double vol = 1.0;
      std::vector<int> idx(d);
      for (int i = 0; i < d; ++i) {
        p.corner[i] = spans[i][pick[i]].first;
        p.extent[i] = spans[i][pick[i]].second;
        vol *= p.extent[i];
        const int n = dm.shape()[i];
        const double cell = g.side() / n;
        idx[i] = (static_cast<int>(std::floor(p.corner[i] / cell)) % n + n) % n;
      }
      p.mass = vol * dm.values()[dm.cell_index(idx)];
      if (p.mass > 0.0) pieces.push_back(std::move(p));
      int axis = d - 1;
      while (axis >= 0) {
        if (++pick[axis] < static_cast<int>(spans[axis].size())) break;
        pick[axis] = 0;
        --axis;
      }
      if (axis < 0) break;
    }
  }
  if (pieces.empty()) return {g.identity(), true};
  std::vector<double> masses;
  masses.reserve(pieces.size());
  for (const auto& p : pieces) masses.push_back(p.mass);
  const auto& p = pieces[rng.weighted_index(masses)];
  std::vector<double> coords(d);
  for (int i = 0; i < d; ++i) coords[i] = p.corner[i] + rng.uniform() * p.extent[i];
  return {g.point(std::move(coords)), false};
}

inline std::vector<Atom> atoms_in(const PointMeasure& m, const MeasurableSet& C) {
  std::vector<Atom> out;
  for (const auto& a : m.atoms())
    if (C.contains(a.location)) out.push_back(a);
  return out;
}

/// Image measure of mu under a location map; canonical merge applies.
inline PointMeasure pushforward(const PointMeasure& m,
                                const std::function<GroupElement(const GroupElement&)>& f) {
  std::vector<Atom> atoms;
  atoms.reserve(m.atoms().size());
  for (const auto& a : m.atoms()) atoms.push_back({f(a.location), a.weight});
  return PointMeasure(m.group(), std::move(atoms));
}

/// Multiset equality of atoms: exact locations on finite groups, wrapped
/// coordinate tolerance on tori; weights compared within tol.
inline bool measures_equal(const PointMeasure& a, const PointMeasure& b, double tol) {
  if (!a.group().same_as(b.group()))
    throw std::invalid_argument("measures_equal: group mismatch");
  if (a.atoms().size() != b.atoms().size()) return false;
  const Group& g = a.group();
  const double loc_tol = g.coord_tol();
  for (std::size_t i = 0; i < a.atoms().size(); ++i) {
    const auto& x = a.atoms()[i];
    const auto& y = b.atoms()[i];
    if (g.is_finite()) {
      if (x.location.index != y.location.index) return false;
    } else {
      for (int k = 0; k < g.dim(); ++k)
        if (g.wrapped_abs(x.location.coords[k] - y.location.coords[k]) > loc_tol)
          return false;
    }
    if (std::abs(x.weight - y.weight) > tol) return false;
  }
  return true;
}

}  // namespace palm
