#include <gtest/gtest.h>

#include <map>
#include <vector>

#include "palm/exact.hpp"
#include "palm/rng.hpp"
#include "palm/stats.hpp"

namespace {

TEST(TvDistance, Examples) {
  std::map<std::string, double> p{{"a", 2.0 / 3.0}, {"b", 1.0 / 3.0}};
  std::map<std::string, double> q{{"a", 0.5}, {"b", 0.5}};
  std::map<std::string, double> r{{"c", 1.0}};
  EXPECT_EQ(palm::tv_distance_exact(p, p), 0.0);
  EXPECT_NEAR(palm::tv_distance_exact(p, q), 1.0 / 6.0, 1e-15);
  EXPECT_EQ(palm::tv_distance_exact(p, r), 1.0);
}

TEST(KsPerm, IdenticalStreamsGivePOne) {
  palm::Rng rng(31);
  std::vector<double> a(500), b;
  for (auto& x : a) x = rng.uniform();
  b = a;
  const auto res = palm::ks_perm_test(a, b, rng, 1e-3);
  EXPECT_EQ(res.statistic, 0.0);
  EXPECT_EQ(res.p_value, 1.0);
}

TEST(KsPerm, DetectsShift) {
  palm::Rng rng(32);
  std::vector<double> a(10000), b(10000);
  for (auto& x : a) x = rng.uniform() + rng.uniform() + rng.uniform() - 1.5;
  for (auto& x : b) x = rng.uniform() + rng.uniform() + rng.uniform() - 1.0;
  const auto res = palm::ks_perm_test(a, b, rng, 1e-4);
  EXPECT_LT(res.p_value, 0.001);
}

TEST(KsPerm, CalibrationUnderNull) {
  // Under the null (same distribution), the sequential p-value must be
  // valid: P(p <= 0.05) <= 0.05, checked over repetitions.
  palm::Rng seeds(33);
  int rejections = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    palm::Rng rng = seeds.fork(rep);
    std::vector<double> a(300), b(300);
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform();
    if (palm::ks_perm_test(a, b, rng, 1e-3).p_value <= 0.05) ++rejections;
  }
  const double rate = rejections / static_cast<double>(reps);
  EXPECT_GE(rate, 0.0);
  EXPECT_LE(rate, 0.10);
}

TEST(KsPerm, ResolvesSmallP) {
  palm::Rng rng(34);
  std::vector<double> a(5000), b(5000);
  for (auto& x : a) x = rng.uniform();
  for (auto& x : b) x = 0.5 + rng.uniform();
  const auto res = palm::ks_perm_test(a, b, rng, 1e-4);
  EXPECT_LE(res.p_value, 1e-4);
}

TEST(KsPerm, HandlesHeavyTies) {
  palm::Rng rng(35);
  std::vector<double> a, b;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(static_cast<double>(rng.uniform() < 0.5));
    b.push_back(static_cast<double>(rng.uniform() < 0.5));
  }
  const auto res = palm::ks_perm_test(a, b, rng, 1e-3);
  EXPECT_GT(res.p_value, 0.001);

  std::vector<double> c;
  for (int i = 0; i < 2000; ++i)
    c.push_back(static_cast<double>(rng.uniform() < 0.9));
  const auto res2 = palm::ks_perm_test(a, c, rng, 1e-4);
  EXPECT_LE(res2.p_value, 1e-4);
}

TEST(KsStatistic, KnownValue) {
  // F_a jumps at 1,2; F_b jumps at 2,3; max gap is 1/2 at x in [1,2)
  EXPECT_NEAR(palm::ks_statistic({1.0, 2.0}, {2.0, 3.0}), 0.5, 1e-15);
}

TEST(KolmogorovQ, Monotone) {
  EXPECT_NEAR(palm::kolmogorov_q(0.0), 1.0, 1e-12);
  EXPECT_GT(palm::kolmogorov_q(0.5), palm::kolmogorov_q(1.0));
  EXPECT_LT(palm::kolmogorov_q(2.0), 0.01);
}

}  // namespace
