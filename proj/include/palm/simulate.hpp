#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "palm/exact.hpp"
#include "palm/measure.hpp"
#include "palm/rng.hpp"

namespace palm {

/// A named generator of i.i.d. configuration draws, with the distributional
/// claims the verification engines may rely on.
struct ScenarioSampler {
  std::string name;
  std::function<Configuration(Rng&)> draw;
  bool claims_stationary = false;
  bool claims_mass_stationary = false;
  double intensity = std::numeric_limits<double>::quiet_NaN();
};

/// Homogeneous Poisson process on a torus: count ~ Poisson(intensity * L^d),
/// locations i.i.d. uniform. Simple with probability one.
inline PointMeasure sample_poisson(const Group& g, double intensity, Rng& rng) {
  if (!g.is_torus())
    throw std::invalid_argument("sample_poisson: torus group required");
  if (!(intensity > 0.0))
    throw std::invalid_argument("sample_poisson: intensity must be > 0");
  // Points closer than the coordinate tolerance would merge into a weight-2
  // atom; that event has probability zero in the model, so redraw on it.
  for (int attempt = 0; attempt < 100; ++attempt) {
    const long count = rng.poisson(intensity * g.haar_total());
    std::vector<Atom> atoms;
    atoms.reserve(count);
    for (long i = 0; i < count; ++i) {
      std::vector<double> coords(g.dim());
      for (auto& c : coords) c = rng.uniform(0.0, g.side());
      atoms.push_back({g.point(std::move(coords)), 1.0});
    }
    PointMeasure pm(g, std::move(atoms));
    if (pm.simple()) return pm;
  }
  throw std::runtime_error("sample_poisson: could not draw a simple pattern");
}

/// Finite-group counterpart: i.i.d. Poisson(intensity) mass at each element.
/// A stationary random measure, generally not simple.
inline PointMeasure sample_poisson_counts(const Group& g, double intensity, Rng& rng) {
  if (!g.is_finite())
    throw std::invalid_argument("sample_poisson_counts: finite group required");
  if (!(intensity > 0.0))
    throw std::invalid_argument("sample_poisson_counts: intensity must be > 0");
  std::vector<double> w(g.order());
  for (auto& x : w) x = static_cast<double>(rng.poisson(intensity));
  return PointMeasure::from_weights(g, w);
}

/// Poisson plus an extra unit atom at the origin, with empty mark. A Poisson
/// point colliding with the added origin atom is redrawn (probability-zero
/// event, as in sample_poisson).
inline Configuration palm_of_poisson(const Group& g, double intensity, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    PointMeasure eta = sample_poisson(g, intensity, rng);
    std::vector<Atom> atoms = eta.atoms();
    atoms.push_back({g.identity(), 1.0});
    PointMeasure xi(g, std::move(atoms));
    if (xi.simple()) return Configuration(std::move(xi));
  }
  throw std::runtime_error("palm_of_poisson: could not draw a simple pattern");
}

struct WeightedConfig {
  Configuration config;
  double weight = 1.0;
};

struct PalmSample {
  std::vector<WeightedConfig> draws;
  long rejected = 0;  // draws with eta(G) = 0
};

/// Size-biased construction of the Palm version of a stationary sampler on a
/// compact group: draw (Y, eta), pick S from eta( . | G), emit S^{-1}(Y, eta)
/// with importance weight eta(G) normalized by the empirical mean mass.
inline PalmSample palm_size_biased(const ScenarioSampler& stationary, long n,
                                   Rng& rng) {
  if (!stationary.claims_stationary)
    throw std::invalid_argument("palm_size_biased: sampler must claim stationarity");
  PalmSample out;
  out.draws.reserve(n);
  double mass_sum = 0.0;
  std::optional<MeasurableSet> all;
  for (long i = 0; i < n; ++i) {
    Rng draw_rng = rng.fork(i);
    Configuration c = stationary.draw(draw_rng);
    const double mass = total_mass(c.measure);
    mass_sum += mass;
    if (mass <= 0.0) {
      ++out.rejected;
      continue;
    }
    if (!all) all = MeasurableSet::all(c.group());
    const auto s = conditional_sample(c.measure, *all, draw_rng);
    out.draws.push_back({shift_config(c.group().inverse(s.location), c), mass});
  }
  const double mean_mass = mass_sum / static_cast<double>(n);
  if (mean_mass <= 0.0) throw std::runtime_error("palm_size_biased: zero mean mass");
  for (auto& d : out.draws) d.weight /= mean_mass;
  return out;
}

/// Multinomial importance resampling of weighted draws into an unweighted
/// stream.
inline std::vector<Configuration> importance_resample(const PalmSample& sample,
                                                      long n_out, Rng& rng) {
  std::vector<double> w;
  w.reserve(sample.draws.size());
  for (const auto& d : sample.draws) w.push_back(d.weight);
  std::vector<Configuration> out;
  out.reserve(n_out);
  for (long i = 0; i < n_out; ++i)
    out.push_back(sample.draws[rng.weighted_index(w)].config);
  return out;
}

/// Exact Palm distribution of a finitely supported stationary distribution
/// over atomic configurations: mass at t contributes p * w / E[eta(G)] to the
/// outcome t^{-1}(Y, eta). Probabilities sum to one.
inline ConfigDist palm_size_biased_exact(const ConfigDist& stationary) {
  double expected_mass = 0.0;
  stationary.for_each([&](const Configuration& c, double p) {
    expected_mass += p * total_mass(c.measure);
  });
  if (expected_mass <= 0.0)
    throw std::invalid_argument("palm_size_biased_exact: zero expected mass");
  ConfigDist out;
  stationary.for_each([&](const Configuration& c, double p) {
    const auto& pm = std::get<PointMeasure>(c.measure);
    for (const auto& a : pm.atoms())
      out.add(shift_config(c.group().inverse(a.location), c),
              p * a.weight / expected_mass);
  });
  return out;
}

/// Uniform mixture of all left translates of a fixed configuration; a
/// stationary distribution on a finite group.
inline ConfigDist uniform_translates(const Configuration& c0) {
  const Group& g = c0.group();
  if (!g.is_finite())
    throw std::invalid_argument("uniform_translates: finite group required");
  ConfigDist out;
  const double p = 1.0 / g.order();
  for (int i = 0; i < g.order(); ++i) out.add(shift_config(g.element(i), c0), p);
  return out;
}

/// Cox process driven by (X, xi): conditionally on the configuration, Poisson
/// with intensity measure xi. Coinciding points merge into integer masses.
inline PointMeasure sample_cox(const Configuration& c, Rng& rng) {
  const Group& g = c.group();
  const double mass = total_mass(c.measure);
  if (!(mass >= 0.0) || !std::isfinite(mass))
    throw std::invalid_argument("sample_cox: non-finite intensity mass");
  std::vector<Atom> atoms;
  if (mass > 0.0) {
    const long count = rng.poisson(mass);
    const auto all = MeasurableSet::all(g);
    atoms.reserve(count);
    for (long i = 0; i < count; ++i) {
      const auto s = conditional_sample(c.measure, all, rng);
      atoms.push_back({s.location, 1.0});
    }
  }
  return PointMeasure(g, std::move(atoms));
}

/// Modified Cox process N: the Cox draw plus an extra unit atom at the origin.
inline PointMeasure modified_cox(const Configuration& c, Rng& rng) {
  PointMeasure cox = sample_cox(c, rng);
  std::vector<Atom> atoms = cox.atoms();
  atoms.push_back({c.group().identity(), 1.0});
  return PointMeasure(c.group(), std::move(atoms));
}

enum class BackgroundKind { UniformShiftLattice, IidGridField, IndependentPoisson };

inline BackgroundKind background_kind_from_name(const std::string& name) {
  if (name == "uniform_shift_lattice") return BackgroundKind::UniformShiftLattice;
  if (name == "iid_grid_field") return BackgroundKind::IidGridField;
  if (name == "independent_poisson") return BackgroundKind::IndependentPoisson;
  throw std::invalid_argument("unknown background kind: " + name);
}

/// Stationary background marks, independent of the main configuration by
/// construction (callers pass a dedicated stream).
///
/// UniformShiftLattice requires an integer torus side; it returns the unit
/// lattice shifted by -U_C together with an intact uniform scalar, the (Z, U)
/// pair consumed by the circular lexicographic rule.
inline Mark sample_background(BackgroundKind kind, const Group& g, Rng& rng) {
  switch (kind) {
    case BackgroundKind::UniformShiftLattice: {
      if (!g.is_torus())
        throw std::invalid_argument("uniform_shift_lattice: torus group required");
      const double L = g.side();
      const long cells = static_cast<long>(std::llround(L));
      if (std::abs(L - static_cast<double>(cells)) > 1e-9)
        throw std::invalid_argument("uniform_shift_lattice: integer side required");
      std::vector<double> offset(g.dim());
      for (auto& u : offset) u = rng.uniform();
      std::vector<Atom> atoms;
      std::vector<int> idx(g.dim(), 0);
      for (;;) {
        std::vector<double> coords(g.dim());
        for (int i = 0; i < g.dim(); ++i)
          coords[i] = g.wrap(static_cast<double>(idx[i]) - offset[i]);
        atoms.push_back({g.point(std::move(coords)), 1.0});
        int axis = g.dim() - 1;
        while (axis >= 0) {
          if (++idx[axis] < cells) break;
          idx[axis] = 0;
          --axis;
        }
        if (axis < 0) break;
      }
      return Mark::tuple({Mark::point_pattern(PointMeasure(g, std::move(atoms))),
                          Mark::scalar(rng.uniform())});
    }
    case BackgroundKind::IidGridField: {
      if (g.is_finite()) {
        std::vector<double> w(g.order());
        for (auto& x : w) x = rng.uniform(0.5, 1.5);
        return Mark::point_pattern(PointMeasure::from_weights(g, w));
      }
      const long cells = static_cast<long>(std::llround(g.side()));
      std::vector<int> shape(g.dim(), static_cast<int>(cells));
      std::size_t count = 1;
      for (int s : shape) count *= static_cast<std::size_t>(s);
      std::vector<double> values(count);
      for (auto& v : values) v = rng.uniform(0.5, 1.5);
      DensityMeasure field(g, shape, std::move(values));
      // Random phase: a uniform within-cell offset makes the law invariant
      // under every shift, not only grid-aligned ones.
      std::vector<double> off(g.dim());
      for (auto& u : off) u = rng.uniform(0.0, g.side() / cells);
      return Mark::grid_field(field.shifted(g.point(std::move(off))));
    }
    case BackgroundKind::IndependentPoisson: {
      if (g.is_finite())
        return Mark::point_pattern(sample_poisson_counts(g, 1.0, rng));
      return Mark::point_pattern(sample_poisson(g, 1.0, rng));
    }
  }
  throw std::logic_error("sample_background: unknown kind");
}

}  // namespace palm
