#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "palm/exact.hpp"
#include "palm/measure.hpp"

namespace {

using palm::Atom;
using palm::Configuration;
using palm::DensityMeasure;
using palm::Group;
using palm::Mark;
using palm::MeasurableSet;
using palm::Measure;
using palm::PointMeasure;

TEST(PointMeasureTest, CanonicalMergeAndSimpleFlag) {
  const Group z4 = Group::cyclic(4);
  PointMeasure m(z4, {{z4.element(1), 1.0}, {z4.element(1), 2.0}, {z4.element(0), 1.0}});
  ASSERT_EQ(m.atoms().size(), 2u);
  EXPECT_EQ(m.atoms()[0].location.index, 0);
  EXPECT_EQ(m.atoms()[1].weight, 3.0);
  EXPECT_FALSE(m.simple());

  PointMeasure s(z4, {{z4.element(2), 1.0}, {z4.element(0), 1.0}});
  EXPECT_TRUE(s.simple());
}

TEST(PointMeasureTest, RejectsNonPositiveWeights) {
  const Group z4 = Group::cyclic(4);
  EXPECT_THROW(PointMeasure(z4, {{z4.element(0), 0.0}}), std::invalid_argument);
  EXPECT_THROW(PointMeasure(z4, {{z4.element(0), -1.0}}), std::invalid_argument);
}

TEST(ShiftMeasureTest, FiniteShift) {
  const Group z4 = Group::cyclic(4);
  const PointMeasure m(z4, {{z4.element(0), 1.0}, {z4.element(1), 2.0}});
  const auto shifted = palm::shift_point_measure(z4.element(2), m);
  EXPECT_EQ(shifted.mass_at(z4.element(2)), 1.0);
  EXPECT_EQ(shifted.mass_at(z4.element(3)), 2.0);
  const auto same = palm::shift_point_measure(z4.identity(), m);
  EXPECT_TRUE(palm::measures_equal(m, same, 0.0));
}

TEST(ShiftMeasureTest, TorusWrap) {
  const Group t = Group::torus(1, 10.0);
  const PointMeasure m(t, {{t.point({9.5}), 1.0}});
  const auto shifted = palm::shift_point_measure(t.point({1.0}), m);
  EXPECT_NEAR(shifted.atoms()[0].location.coords[0], 0.5, 1e-12);
  EXPECT_NEAR(shifted.total_mass(), m.total_mass(), 0.0);
}

TEST(DensityTest, TotalMassAndShiftConservesMass) {
  const Group t = Group::torus(1, 10.0);
  const auto d = DensityMeasure::constant(t, {50}, 1.0);
  EXPECT_NEAR(d.total_mass(), 10.0, 1e-9);
  // fractional shift
  const auto s = d.shifted(t.point({0.37}));
  EXPECT_NEAR(s.total_mass(), 10.0, 1e-9);

  std::vector<double> vals(50, 0.0);
  vals[3] = 5.0;
  const DensityMeasure bump(t, {50}, vals);
  const auto sb = bump.shifted(t.point({0.3}));  // 1.5 cells of width 0.2
  EXPECT_NEAR(sb.total_mass(), bump.total_mass(), 1e-12);
  EXPECT_NEAR(sb.values()[4], 2.5, 1e-12);
  EXPECT_NEAR(sb.values()[5], 2.5, 1e-12);
}

TEST(DensityTest, MassInBoxExact) {
  const Group t = Group::torus(2, 10.0);
  const auto d = DensityMeasure::constant(t, {20, 20}, 2.0);
  const auto C = MeasurableSet::box(t, {1.3, 2.7}, {2.0, 1.1});
  EXPECT_NEAR(d.mass_in(C), 2.0 * 2.0 * 1.1, 1e-10);
}

TEST(ShiftConfigTest, GroupActionLawOnSamples) {
  palm::Rng rng(21);
  const Group t = Group::torus(2, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Atom> atoms;
    const int k = 1 + static_cast<int>(rng.uniform_below(5));
    for (int i = 0; i < k; ++i)
      atoms.push_back({t.point({rng.uniform(0, 10), rng.uniform(0, 10)}), 1.0});
    Configuration c(
        Mark::tuple({Mark::scalar(0.5),
                     Mark::point_pattern(PointMeasure(t, {atoms.front()}))}),
        PointMeasure(t, atoms));
    const auto s = t.point({rng.uniform(0, 10), rng.uniform(0, 10)});
    const auto u = t.point({rng.uniform(0, 10), rng.uniform(0, 10)});
    // s(t c) = (st) c
    const auto lhs = palm::shift_config(s, palm::shift_config(u, c));
    const auto rhs = palm::shift_config(t.compose(s, u), c);
    EXPECT_TRUE(palm::measures_equal(std::get<PointMeasure>(lhs.measure),
                                     std::get<PointMeasure>(rhs.measure), 1e-9));
    // identity and round trip
    const auto id = palm::shift_config(t.identity(), c);
    EXPECT_TRUE(palm::measures_equal(std::get<PointMeasure>(id.measure),
                                     std::get<PointMeasure>(c.measure), 0.0));
    const auto back = palm::shift_config(t.inverse(s), palm::shift_config(s, c));
    EXPECT_TRUE(palm::measures_equal(std::get<PointMeasure>(back.measure),
                                     std::get<PointMeasure>(c.measure), 1e-9));
  }
}

TEST(ConditionalSampleTest, WeightRatio) {
  palm::Rng rng(22);
  const Group z3 = Group::cyclic(3);
  const Measure m = PointMeasure(z3, {{z3.element(0), 2.0}, {z3.element(1), 1.0}});
  const auto C = MeasurableSet::of_elements(z3, {0, 1});
  long zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = palm::conditional_sample(m, C, rng);
    ASSERT_FALSE(s.fallback);
    ASSERT_TRUE(C.contains(s.location));
    if (s.location.index == 0) ++zeros;
  }
  EXPECT_NEAR(zeros / static_cast<double>(n), 2.0 / 3.0, 0.01);
}

TEST(ConditionalSampleTest, SingletonAndFallback) {
  palm::Rng rng(23);
  const Group z3 = Group::cyclic(3);
  const Measure m = PointMeasure(z3, {{z3.element(2), 4.0}});
  const auto only2 = MeasurableSet::of_elements(z3, {2});
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(palm::conditional_sample(m, only2, rng).location.index, 2);

  const auto miss = MeasurableSet::of_elements(z3, {0, 1});
  const auto s = palm::conditional_sample(m, miss, rng);
  EXPECT_TRUE(s.fallback);
  EXPECT_EQ(s.location.index, 0);
}

TEST(ConditionalSampleTest, DensityCellsProportional) {
  palm::Rng rng(24);
  const Group t = Group::torus(1, 10.0);
  std::vector<double> vals(10, 0.0);
  vals[0] = 3.0;  // cells are [0,1), [1,2), ...
  vals[4] = 1.0;
  const Measure m = DensityMeasure(t, {10}, vals);
  const auto C = MeasurableSet::all(t);
  long low = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto s = palm::conditional_sample(m, C, rng);
    ASSERT_FALSE(s.fallback);
    if (s.location.coords[0] < 1.0) ++low;
  }
  EXPECT_NEAR(low / static_cast<double>(n), 0.75, 0.01);
}

TEST(TotalMassTest, Examples) {
  const Group z3 = Group::cyclic(3);
  const Measure m = PointMeasure(z3, {{z3.element(0), 2.0}, {z3.element(1), 1.0}});
  EXPECT_EQ(palm::total_mass(m), 3.0);
  EXPECT_EQ(palm::total_mass(Measure(PointMeasure::empty(z3))), 0.0);

  const Group t = Group::torus(1, 10.0);
  EXPECT_NEAR(palm::total_mass(Measure(DensityMeasure::constant(t, {64}, 1.0))), 10.0,
              1e-9);
}

TEST(PushforwardTest, MassConservedAndExamples) {
  const Group z4 = Group::cyclic(4);
  const PointMeasure m(z4, {{z4.element(0), 1.0}, {z4.element(1), 1.0}});
  const auto ident = palm::pushforward(m, [](const palm::GroupElement& x) { return x; });
  EXPECT_TRUE(palm::measures_equal(m, ident, 0.0));

  const auto to_e = palm::pushforward(
      m, [&](const palm::GroupElement&) { return z4.identity(); });
  ASSERT_EQ(to_e.atoms().size(), 1u);
  EXPECT_EQ(to_e.atoms()[0].weight, m.total_mass());

  const auto plus1 = palm::pushforward(
      m, [&](const palm::GroupElement& x) { return z4.compose(z4.element(1), x); });
  EXPECT_EQ(plus1.mass_at(z4.element(1)), 1.0);
  EXPECT_EQ(plus1.mass_at(z4.element(2)), 1.0);
}

TEST(MeasuresEqualTest, ToleranceAndOrder) {
  const Group z4 = Group::cyclic(4);
  const double tol = 1e-6;
  const PointMeasure a(z4, {{z4.element(0), 1.0}});
  const PointMeasure b(z4, {{z4.element(0), 1.0 + 2 * tol}});
  EXPECT_FALSE(palm::measures_equal(a, b, tol));
  const PointMeasure c(z4, {{z4.element(0), 1.0}, {z4.element(1), 1.0}});
  const PointMeasure d(z4, {{z4.element(1), 1.0}, {z4.element(0), 1.0}});
  EXPECT_TRUE(palm::measures_equal(c, d, 0.0));
}

TEST(MarkTest, FindNestedScalar) {
  const Group t = Group::torus(1, 10.0);
  const Mark m = Mark::tuple(
      {Mark::point_pattern(PointMeasure(t, {{t.point({1.0}), 1.0}})),
       Mark::tuple({Mark::scalar(0.25)})});
  const Mark* s = m.find(Mark::Kind::Scalar);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->scalar_value(), 0.25);
  EXPECT_EQ(m.find(Mark::Kind::GridField), nullptr);
}

TEST(ConfigKeyTest, DistinguishesAndMatches) {
  const Group z3 = Group::cyclic(3);
  const Configuration a(PointMeasure::from_weights(z3, {2, 1, 0}));
  const Configuration b(PointMeasure::from_weights(z3, {2, 1, 0}));
  const Configuration c(PointMeasure::from_weights(z3, {1, 0, 2}));
  EXPECT_EQ(palm::config_key(a), palm::config_key(b));
  EXPECT_NE(palm::config_key(a), palm::config_key(c));
}

TEST(ConfigDistTest, TvExamples) {
  const Group z3 = Group::cyclic(3);
  const Configuration a(PointMeasure::from_weights(z3, {2, 1, 0}));
  const Configuration b(PointMeasure::from_weights(z3, {1, 0, 2}));

  palm::ConfigDist p, q, r;
  p.add(a, 2.0 / 3.0);
  p.add(b, 1.0 / 3.0);
  q.add(a, 2.0 / 3.0);
  q.add(b, 1.0 / 3.0);
  EXPECT_EQ(palm::ConfigDist::tv(p, q), 0.0);

  r.add(a, 0.5);
  r.add(b, 0.5);
  EXPECT_NEAR(palm::ConfigDist::tv(p, r), 1.0 / 6.0, 1e-15);
}

}  // namespace
