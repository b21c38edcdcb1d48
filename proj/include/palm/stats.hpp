#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "palm/rng.hpp"

namespace palm {

/// Two-sample Kolmogorov-Smirnov statistic; inputs need not be sorted.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(i / na - j / nb));
  }
  return best;
}

struct KsPermResult {
  double statistic = 0.0;
  double p_value = 1.0;
  long permutations = 0;
};

/// Permutation-calibrated two-sample KS test with a sequential Monte Carlo
/// p-value (stop at the 20th exceedance, or at a cap fine enough to resolve
/// `min_resolvable_p`). The returned p-value is valid: P(p <= u) <= u under
/// exchangeability for every u.
inline KsPermResult ks_perm_test(const std::vector<double>& a,
                                 const std::vector<double>& b, Rng& rng,
                                 double min_resolvable_p = 1e-4) {
  KsPermResult res;
  res.statistic = ks_statistic(a, b);

  const std::size_t n = a.size(), m = b.size(), total = n + m;
  // Pool and sort once; only tie-group boundaries matter afterwards.
  std::vector<double> pooled;
  pooled.reserve(total);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<std::uint8_t> group_end(total, 0);
  for (std::size_t k = 0; k < total; ++k)
    group_end[k] = (k + 1 == total) || (pooled[k] < pooled[k + 1]);

  const long cap = std::clamp<long>(
      static_cast<long>(std::ceil(1.05 / std::max(min_resolvable_p, 1e-9))), 999,
      2000000);
  const long stop_exceed = 12;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  const double obs = res.statistic - 1e-12;

  long exceed = 0, done = 0;
  while (done < cap) {
    // Assign labels to sorted positions by sequential sampling without
    // replacement; exchangeable, one bounded draw per position.
    double cum = 0.0, best = 0.0;
    std::uint64_t rem_a = n, rem_total = total;
    for (std::size_t k = 0; k < total; ++k) {
      if (rng.bounded_fast(rem_total) < rem_a) {
        cum += inv_n;
        --rem_a;
      } else {
        cum -= inv_m;
      }
      --rem_total;
      if (group_end[k]) best = std::max(best, std::abs(cum));
    }
    ++done;
    if (best >= obs) {
      ++exceed;
      if (exceed >= stop_exceed) break;
    }
  }
  res.permutations = done;
  res.p_value = (exceed >= stop_exceed)
                    ? static_cast<double>(exceed) / static_cast<double>(done)
                    : (1.0 + exceed) / (1.0 + static_cast<double>(done));
  return res;
}

/// One-sample Kolmogorov statistic against an analytic CDF (sorted not required).
template <typename Cdf>
inline double ks_statistic_1s(std::vector<double> a, Cdf&& cdf) {
  if (a.empty()) throw std::invalid_argument("ks1: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double F = cdf(a[i]);
    best = std::max(best, std::abs((i + 1) / n - F));
    best = std::max(best, std::abs(i / n - F));
  }
  return best;
}

/// Asymptotic Kolmogorov tail Q(x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
    s += term;
    if (std::abs(term) < 1e-14) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

inline double ks_pvalue_1s(double statistic, std::size_t n) {
  return kolmogorov_q(statistic * std::sqrt(static_cast<double>(n)));
}

/// Mean of a sample.
inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace palm
