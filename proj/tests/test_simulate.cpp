#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "palm/simulate.hpp"
#include "palm/stats.hpp"

namespace {

using palm::Configuration;
using palm::ConfigDist;
using palm::Group;
using palm::Mark;
using palm::MeasurableSet;
using palm::PointMeasure;
using palm::Rng;

TEST(Poisson, MeanCount) {
  Rng rng(41);
  const Group g = Group::torus(1, 10.0);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += palm::sample_poisson(g, 1.0, rng).atoms().size();
  EXPECT_NEAR(sum / n, 10.0, 0.3);
}

TEST(Poisson, VoidProbability) {
  Rng rng(42);
  const Group g = Group::torus(1, 1.0);
  long empty = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (palm::sample_poisson(g, 0.001, rng).atoms().empty()) ++empty;
  EXPECT_NEAR(empty / static_cast<double>(n), std::exp(-0.001), 0.005);
}

// Conditioned on the count, circle gaps must look like uniform order
// statistics spacings. Oracle: spacings simulated directly from sorted
// uniforms, compared by permutation KS on one uniformly chosen gap per draw.
TEST(Poisson, GapsMatchUniformSpacings) {
  Rng rng(43);
  const Group g = Group::torus(1, 10.0);
  const int target_count = 10;
  std::vector<double> observed, oracle;
  while (observed.size() < 3000u) {
    const auto pm = palm::sample_poisson(g, 1.0, rng);
    if (static_cast<int>(pm.atoms().size()) != target_count) continue;
    std::vector<double> xs;
    for (const auto& a : pm.atoms()) xs.push_back(a.location.coords[0]);
    std::sort(xs.begin(), xs.end());
    const std::size_t k = rng.uniform_below(xs.size());
    const double gap = (k + 1 < xs.size()) ? xs[k + 1] - xs[k]
                                           : xs[0] + 10.0 - xs.back();
    observed.push_back(gap / 10.0);
  }
  while (oracle.size() < 3000u) {
    std::vector<double> us(target_count);
    for (auto& u : us) u = rng.uniform();
    std::sort(us.begin(), us.end());
    const std::size_t k = rng.uniform_below(us.size());
    const double gap =
        (k + 1 < us.size()) ? us[k + 1] - us[k] : us[0] + 1.0 - us.back();
    oracle.push_back(gap);
  }
  EXPECT_GT(palm::ks_perm_test(observed, oracle, rng, 1e-3).p_value, 0.01);
}

TEST(PalmOfPoisson, AtomAtOriginAndMeanCount) {
  Rng rng(44);
  const Group g = Group::torus(1, 10.0);
  double sum = 0.0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    const auto c = palm::palm_of_poisson(g, 1.0, rng);
    const auto& pm = std::get<PointMeasure>(c.measure);
    ASSERT_TRUE(pm.has_atom_at(g.identity()));
    sum += pm.total_mass();
  }
  EXPECT_NEAR(sum / n, 11.0, 0.3);
}

TEST(PalmOfPoisson, RemovingOriginRecoversPoissonCounts) {
  Rng rng(45);
  const Group g = Group::torus(1, 10.0);
  std::vector<double> counts_palm, counts_poisson;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto c = palm::palm_of_poisson(g, 1.0, rng);
    counts_palm.push_back(
        std::get<PointMeasure>(c.measure).total_mass() - 1.0);
    counts_poisson.push_back(palm::sample_poisson(g, 1.0, rng).atoms().size());
  }
  EXPECT_GT(palm::ks_perm_test(counts_palm, counts_poisson, rng, 1e-3).p_value, 0.01);
}

// The frozen expected Palm distribution on Z3 for the uniformly rotated mass
// vector (2,1,0). Derivation (independent enumeration, also done inline
// below): rotation B and picked atom t contribute mass (B mu0)({t}) / 9 to
// the configuration seen from t, which depends only on B - t; collecting
// terms gives probability 2/3 for masses (2,1,0) and 1/3 for (1,0,2).
TEST(PalmExact, Z3RotatedMassVector) {
  const Group z3 = Group::cyclic(3);
  const Configuration mu0(PointMeasure::from_weights(z3, {2, 1, 0}));
  const ConfigDist stationary = palm::uniform_translates(mu0);
  const ConfigDist palm_dist = palm::palm_size_biased_exact(stationary);

  EXPECT_NEAR(palm_dist.total(), 1.0, 1e-12);
  ASSERT_EQ(palm_dist.support_size(), 2u);

  const Configuration c210(PointMeasure::from_weights(z3, {2, 1, 0}));
  const Configuration c102(PointMeasure::from_weights(z3, {1, 0, 2}));
  EXPECT_NEAR(palm_dist.prob_of(c210), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(palm_dist.prob_of(c102), 1.0 / 3.0, 1e-12);

  // Independent oracle: direct enumeration over (rotation, atom) pairs.
  ConfigDist oracle;
  for (int b = 0; b < 3; ++b) {
    const Configuration rotated = palm::shift_config(z3.element(b), mu0);
    const auto& pm = std::get<PointMeasure>(rotated.measure);
    for (const auto& a : pm.atoms())
      oracle.add(palm::shift_config(z3.inverse(a.location), rotated),
                 (1.0 / 3.0) * a.weight / 3.0);
  }
  EXPECT_LE(ConfigDist::tv(palm_dist, oracle), 1e-12);
}

TEST(PalmExact, DeterministicHaarIsItsOwnPalm) {
  const Group z4 = Group::cyclic(4);
  const Configuration haar_cfg(PointMeasure::counting(z4));
  ConfigDist stationary;
  stationary.add(haar_cfg, 1.0);
  const ConfigDist palm_dist = palm::palm_size_biased_exact(stationary);
  EXPECT_LE(ConfigDist::tv(palm_dist, stationary), 1e-12);
}

// Cross-validation of the two Palm constructions for the Poisson process on
// the circle: the size-biased sampler resampled by importance weights must
// match palm_of_poisson in count statistics.
TEST(PalmSizeBiased, MatchesPalmOfPoissonCounts) {
  Rng rng(46);
  const Group g = Group::torus(1, 10.0);
  palm::ScenarioSampler stationary{
      "poisson", [g](Rng& r) { return Configuration(palm::sample_poisson(g, 1.0, r)); },
      true, false, 1.0};
  const auto weighted = palm::palm_size_biased(stationary, 6000, rng);
  EXPECT_EQ(weighted.rejected, 0);
  const auto resampled = palm::importance_resample(weighted, 4000, rng);

  std::vector<double> counts_sb, counts_direct;
  for (const auto& c : resampled)
    counts_sb.push_back(std::get<PointMeasure>(c.measure).total_mass());
  for (int i = 0; i < 4000; ++i) {
    const auto c = palm::palm_of_poisson(g, 1.0, rng);
    counts_direct.push_back(std::get<PointMeasure>(c.measure).total_mass());
  }
  EXPECT_GT(palm::ks_perm_test(counts_sb, counts_direct, rng, 1e-3).p_value, 0.01);

  // every size-biased draw has an atom at the origin
  for (const auto& d : weighted.draws)
    ASSERT_TRUE(std::get<PointMeasure>(d.config.measure).has_atom_at(g.identity()));
}

TEST(Cox, MeanCountUnderScaledHaar) {
  Rng rng(47);
  const Group g = Group::torus(1, 10.0);
  const Configuration c(palm::DensityMeasure::constant(g, {50}, 2.0));
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += palm::sample_cox(c, rng).total_mass();
  EXPECT_NEAR(sum / n, 20.0, 0.5);
}

TEST(Cox, DegenerateSingleAtomIntensity) {
  Rng rng(48);
  const Group z5 = Group::cyclic(5);
  const Configuration c(PointMeasure(z5, {{z5.element(0), 3.0}}));
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto pm = palm::sample_cox(c, rng);
    for (const auto& a : pm.atoms()) ASSERT_EQ(a.location.index, 0);
    sum += pm.total_mass();
  }
  EXPECT_NEAR(sum / n, 3.0, 0.05);
}

TEST(Cox, UniformIntensityIndistinguishableFromPoisson) {
  Rng rng(49);
  const Group g = Group::torus(1, 10.0);
  const Configuration driver(palm::DensityMeasure::constant(g, {50}, 1.0));
  std::vector<double> cox_counts, poisson_counts, cox_nn, poisson_nn;
  const int n = 4000;
  auto nearest_gap = [&](const PointMeasure& pm) {
    std::vector<double> xs;
    for (const auto& a : pm.atoms()) xs.push_back(a.location.coords[0]);
    if (xs.size() < 2) return 10.0;
    std::sort(xs.begin(), xs.end());
    double best = xs[0] + 10.0 - xs.back();
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      best = std::min(best, xs[i + 1] - xs[i]);
    return best;
  };
  for (int i = 0; i < n; ++i) {
    const auto a = palm::sample_cox(driver, rng);
    const auto b = palm::sample_poisson(g, 1.0, rng);
    cox_counts.push_back(a.total_mass());
    poisson_counts.push_back(b.total_mass());
    cox_nn.push_back(nearest_gap(a));
    poisson_nn.push_back(nearest_gap(b));
  }
  EXPECT_GT(palm::ks_perm_test(cox_counts, poisson_counts, rng, 1e-3).p_value, 0.01);
  EXPECT_GT(palm::ks_perm_test(cox_nn, poisson_nn, rng, 1e-3).p_value, 0.01);
}

TEST(ModifiedCox, AlwaysHasOriginAtom) {
  Rng rng(50);
  const Group g = Group::torus(2, 10.0);
  const Configuration c(palm::DensityMeasure::constant(g, {10, 10}, 0.02));
  for (int i = 0; i < 200; ++i) {
    const auto pm = palm::modified_cox(c, rng);
    ASSERT_TRUE(pm.has_atom_at(g.identity()));
  }
}

TEST(Background, LatticePlusScalarShape) {
  Rng rng(51);
  const Group g = Group::torus(1, 10.0);
  const Mark z = palm::sample_background(palm::BackgroundKind::UniformShiftLattice,
                                         g, rng);
  ASSERT_EQ(z.kind(), Mark::Kind::Tuple);
  const auto* lattice = z.find(Mark::Kind::PointPattern);
  const auto* u = z.find(Mark::Kind::Scalar);
  ASSERT_NE(lattice, nullptr);
  ASSERT_NE(u, nullptr);
  EXPECT_EQ(lattice->pattern().atoms().size(), 10u);
  EXPECT_GE(u->scalar_value(), 0.0);
  EXPECT_LT(u->scalar_value(), 1.0);
  // unit spacing
  const auto& atoms = lattice->pattern().atoms();
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i)
    EXPECT_NEAR(atoms[i + 1].location.coords[0] - atoms[i].location.coords[0], 1.0,
                1e-9);
}

// Shift invariance of background laws, checked through a functional: the
// distance from the origin to the nearest mark point (or the field mass in a
// fixed window) must have the same distribution before and after a fixed
// shift. Point-pattern marks shift exactly, so any shift works; grid fields
// re-bin under fractional shifts, so the full-law check uses a grid-aligned
// shift and the fractional check asserts the exactly conserved mean.
TEST(Background, ShiftInvarianceByFunctional) {
  Rng rng(52);
  const Group g = Group::torus(1, 10.0);
  for (const auto kind : {palm::BackgroundKind::UniformShiftLattice,
                          palm::BackgroundKind::IidGridField,
                          palm::BackgroundKind::IndependentPoisson}) {
    const bool field = kind == palm::BackgroundKind::IidGridField;
    const auto t = g.point({field ? 3.0 : 3.7});
    std::vector<double> base, shifted;
    for (int i = 0; i < 4000; ++i) {
      const Mark z = palm::sample_background(kind, g, rng);
      const Mark zs = palm::shift_mark(g, t, palm::sample_background(kind, g, rng));
      auto functional = [&](const Mark& m) {
        if (const auto* pp = m.find(Mark::Kind::PointPattern)) {
          double best = 10.0;
          for (const auto& a : pp->pattern().atoms())
            best = std::min(best, g.wrapped_abs(a.location.coords[0]));
          return best;
        }
        const auto* f = m.find(Mark::Kind::GridField);
        return f->field().mass_in(MeasurableSet::box(g, {0.0}, {1.5}));
      };
      base.push_back(functional(z));
      shifted.push_back(functional(zs));
    }
    EXPECT_GT(palm::ks_perm_test(base, shifted, rng, 1e-3).p_value, 0.01)
        << "kind " << static_cast<int>(kind);
  }
}

TEST(Background, GridFieldMeanConservedUnderFractionalShift) {
  Rng rng(54);
  const Group g = Group::torus(1, 10.0);
  const auto t = g.point({3.7});
  for (int i = 0; i < 200; ++i) {
    const Mark z =
        palm::sample_background(palm::BackgroundKind::IidGridField, g, rng);
    const Mark zs = palm::shift_mark(g, t, z);
    EXPECT_NEAR(z.field().total_mass(), zs.field().total_mass(), 1e-9);
  }
}

TEST(Simulate, ReproducibleGivenSeed) {
  const Group g = Group::torus(2, 10.0);
  Rng a(99), b(99);
  const auto pa = palm::sample_poisson(g, 1.0, a);
  const auto pb = palm::sample_poisson(g, 1.0, b);
  ASSERT_EQ(pa.atoms().size(), pb.atoms().size());
  for (std::size_t i = 0; i < pa.atoms().size(); ++i) {
    EXPECT_EQ(pa.atoms()[i].location.coords[0], pb.atoms()[i].location.coords[0]);
    EXPECT_EQ(pa.atoms()[i].location.coords[1], pb.atoms()[i].location.coords[1]);
  }
}

TEST(Simulate, InvalidArguments) {
  Rng rng(53);
  const Group g = Group::torus(1, 10.0);
  EXPECT_THROW(palm::sample_poisson(g, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(palm::sample_poisson(Group::cyclic(3), 1.0, rng),
               std::invalid_argument);
  EXPECT_THROW(palm::background_kind_from_name("bogus"), std::invalid_argument);
}

}  // namespace
