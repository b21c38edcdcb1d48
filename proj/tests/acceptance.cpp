// Acceptance suite: runs every shipped claim check at full scale and prints
// one PASS/FAIL line per criterion, including the runtime budgets. Exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <vector>

#include "palm/report.hpp"
#include "palm/scenarios.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using palm::Configuration;
using palm::ConfigDist;
using palm::Group;
using palm::MeasurableSet;
using palm::PointMeasure;
using palm::Rng;
using palm::TestReport;
using palm::Verdict;

int g_failures = 0;

void report(int index, const char* label, bool ok, double seconds,
            const std::string& detail) {
  std::printf("%s criterion %2d: %-34s (%6.2f s) %s\n", ok ? "PASS" : "FAIL",
              index, label, seconds, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Exact typicality on Z3: the derived size-biased law passes every
//    nonempty C with TV <= 1e-12; the perturbed mixture fails on C = G with
//    TV >= 0.05. Budget 1 s.
void criterion_1() {
  const auto t0 = Clock::now();
  const Group z3 = Group::cyclic(3);

  const ConfigDist palm_dist = palm::detail::z3_palm_dist();
  const Configuration c210(PointMeasure::from_weights(z3, {2, 1, 0}));
  const Configuration c102(PointMeasure::from_weights(z3, {1, 0, 2}));
  bool ok = std::abs(palm_dist.prob_of(c210) - 2.0 / 3.0) <= 1e-12 &&
            std::abs(palm_dist.prob_of(c102) - 1.0 / 3.0) <= 1e-12;

  double max_tv = 0.0;
  for (const auto& [name, C] : palm::detail::all_nonempty_subsets(z3)) {
    const auto [tv, fb] = palm::typicality_tv_exact(palm_dist, C);
    max_tv = std::max(max_tv, tv);
  }
  ok = ok && max_tv <= 1e-12;

  const auto [tv_bad, fb_bad] = palm::typicality_tv_exact(
      palm::detail::z3_wrong_mixture_dist(), MeasurableSet::all(z3));
  ok = ok && tv_bad >= 0.05;

  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max TV %.2e on 7 sets, perturbed TV %.3f",
                max_tv, tv_bad);
  report(1, "exact typicality on Z3", ok && secs < 1.0, secs, buf);
}

// 2. Exact non-Abelian typicality on S3 over >= 20 subsets. Budget 5 s.
void criterion_2() {
  const auto t0 = Clock::now();
  const Group s3 = Group::symmetric3();
  const Configuration base(PointMeasure::from_weights(s3, {3, 1, 2, 0, 1, 0}));
  const ConfigDist palm_dist =
      palm::palm_size_biased_exact(palm::uniform_translates(base));
  const auto sets = palm::detail::subsets_up_to_pairs(s3);
  const TestReport r = palm::mass_stationarity_test_exact(palm_dist, sets);
  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max TV %.2e over %zu subsets", r.max_tv(),
                sets.size());
  report(2, "exact typicality on S3",
         r.verdict == Verdict::Pass && sets.size() >= 20 && secs < 5.0, secs, buf);
}

// 3. Uniform relocation on Z6: S^-1 X exactly stationary; for non-stationary
//    X the relocated law is exactly distinguishable from X.
void criterion_3() {
  const auto t0 = Clock::now();
  const Group z6 = Group::cyclic(6);
  const Configuration pinned(
      palm::Mark::point_pattern(PointMeasure::from_weights(z6, {5, 1, 1, 1, 1, 1})),
      PointMeasure::counting(z6));
  const ConfigDist relocated = palm::uniform_translates(pinned);
  std::vector<palm::GroupElement> ts;
  for (int i = 0; i < z6.order(); ++i) ts.push_back(z6.element(i));
  const TestReport stat = palm::stationarity_test_exact(relocated, ts);

  ConfigDist pinned_dist;
  pinned_dist.add(pinned, 1.0);
  const double gap = ConfigDist::tv(relocated, pinned_dist);

  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "stationarity max TV %.2e, relocation gap %.3f", stat.max_tv(),
                gap);
  report(3, "uniform relocation on Z6",
         stat.verdict == Verdict::Pass && gap > 0.05, secs, buf);
}

// 4. Circle point shifts T_n, n in -3..3, n = 10^4, alpha = 0.01: the
//    headline run passes, and across 100 seeded reruns the claim-level
//    false-rejection rate is at most 5%. Budget 2 min.
void criterion_4() {
  const auto t0 = Clock::now();
  const auto* info = palm::find_scenario("circle-tn-invariance");
  int rejections = 0;
  bool headline_pass = false;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const TestReport r = palm::run_scenario(*info, 10000, 0.01, 1 + rep, 2);
    if (rep == 0) headline_pass = r.verdict == Verdict::Pass;
    if (r.verdict == Verdict::Fail) ++rejections;
  }
  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "headline %s, %d/%d reruns rejected",
                headline_pass ? "pass" : "fail", rejections, reps);
  report(4, "circle point-shift invariance",
         headline_pass && rejections <= 5 && secs < 120.0, secs, buf);
}

// 5. Nearest-point shift rejected at rate >= 0.95 over 20 seeds at n = 10^4,
//    with the closest-point indicator identically one after the shift and
//    below 0.99 before.
void criterion_5() {
  const auto t0 = Clock::now();
  const Group g = Group::torus(2, 10.0);
  const auto* info = palm::find_scenario("nearest-point-negative");
  int rejected = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const TestReport r = palm::run_scenario(*info, 10000, 0.01, 100 + s, 2);
    if (r.verdict == Verdict::Fail) ++rejected;
  }

  // direct check of the indicator construction
  const auto flag = palm::make_functional("closest_flag", g);
  Rng rng(5);
  double pre = 0.0, post = 0.0;
  const int m = 4000;
  for (int i = 0; i < m; ++i) {
    Rng draw = rng.fork(i);
    const Configuration c = palm::palm_of_poisson(g, 1.0, draw);
    pre += flag.evaluate(c)[0];
    const auto t = palm::shift_nearest(c);
    post += flag.evaluate(palm::shift_config(g.inverse(t), c))[0];
  }
  pre /= m;
  post /= m;

  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d/%d seeds rejected, indicator pre %.3f post %.3f", rejected,
                seeds, pre, post);
  report(5, "nearest-point shift rejected",
         rejected >= 19 && post == 1.0 && pre < 0.99, secs, buf);
}

// 6. Planar tree shift: (a) the reverse identity holds on 100% of >= 10^3
//    non-censored configurations; (b) invariance passes on the non-censored
//    subsample at alpha = 0.01 with the censoring rate reported. Budget 3 min.
void criterion_6() {
  const auto t0 = Clock::now();
  const auto* rev = palm::find_scenario("tree-reverse");
  const TestReport a = palm::run_scenario(*rev, 1000, 0.01, 6, 2);
  const bool a_ok = a.verdict == Verdict::Pass && a.n >= 1000 &&
                    a.cells.at(0).statistic == 1.0;

  const auto* inv = palm::find_scenario("tree-invariance");
  const TestReport b = palm::run_scenario(*inv, 4000, 0.01, 7, 2);
  const bool b_ok = b.verdict == Verdict::Pass;

  const double secs = since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "identity %zu/%ld checks, censor rates %.3f / %.3f",
                static_cast<std::size_t>(a.n), a.n,
                a.telemetry.censor_rate(), b.telemetry.censor_rate());
  report(6, "planar tree shift", a_ok && b_ok && secs < 180.0, secs, buf);
}

// 7. Preservation: allocations of every shipped reversible circle rule pass
//    exactly on 10^3 configurations; the nearest-point allocation fails on
//    the three-atom configuration; the windowed tree allocation is injective
//    and inverted by its reverse on the evaluable core.
void criterion_7() {
  const auto t0 = Clock::now();
  const auto* info = palm::find_scenario("preservation-suite");
  const TestReport r = palm::run_scenario(*info, 1000, 0.01, 8, 1);
  bool ok = r.verdict == Verdict::Pass;

  // windowed tree allocation on the core region
  const auto sampler = palm::windowed_tree_sampler(8.0, 1.0);
  const palm::Allocation tau = palm::build_allocation(palm::make_tree_rule());
  const palm::Allocation tau_rev =
      palm::build_allocation(palm::make_tree_reverse_rule());
  Rng rng(9);
  long evaluated = 0, censored = 0, inverted = 0, collisions = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Rng draw = rng.fork(trial);
    const Configuration c = sampler.draw(draw);
    const auto& pm = std::get<PointMeasure>(c.measure);
    const Group& g = c.group();
    std::vector<std::string> targets;
    for (const auto& atom : pm.atoms()) {
      bool core = true;
      for (double coord : atom.location.coords)
        if (std::abs(g.centered(coord)) > 4.0) core = false;
      if (!core) continue;
      const auto target = tau(c, atom.location);
      if (!target) {
        ++censored;
        continue;
      }
      ++evaluated;
      targets.push_back(palm::encode_element(g, *target));
      const auto back = tau_rev(c, *target);
      if (back && g.equal(*back, atom.location)) ++inverted;
    }
    std::sort(targets.begin(), targets.end());
    for (std::size_t i = 0; i + 1 < targets.size(); ++i)
      if (targets[i] == targets[i + 1]) ++collisions;
  }
  const double censor_frac =
      static_cast<double>(censored) / std::max(1L, censored + evaluated);
  ok = ok && evaluated > 1000 && collisions == 0 && inverted == evaluated &&
       censor_frac < 0.1;

  const double secs = since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "circle rules exact on 10^3; tree core: %ld evals, %ld "
                "collisions, inverse rate %.4f",
                evaluated, collisions,
                evaluated > 0 ? static_cast<double>(inverted) / evaluated : 0.0);
  report(7, "allocation preservation", ok, secs, buf);
}

// 8. Cox reduction: the mass-stationary diffuse scenario passes both (X, N)
//    and ((X, xi), N) plus the point route; the shifted block scenario fails
//    on (X, N) at rate >= 0.95 over 20 seeds.
void criterion_8() {
  const auto t0 = Clock::now();
  const auto* pos = palm::find_scenario("cox-reduction");
  const TestReport ok_report = palm::run_scenario(*pos, 10000, 0.01, 11, 2);
  const bool pos_ok = ok_report.verdict == Verdict::Pass;

  const Group g = Group::torus(1, 10.0);
  const auto sets = std::vector<std::pair<std::string, MeasurableSet>>{
      {"arc1", MeasurableSet::box(g, {0.0}, {1.0})}};
  const std::vector<palm::Functional> fs = {palm::make_functional("count:1", g),
                                            palm::make_functional("gaps:1", g),
                                            palm::make_functional("nn:2", g)};
  int rejected = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const TestReport r = palm::cox_reduction_test(
        palm::step_palm_sampler(10.0, 50, 0.1, 2.0, 1.0, 0.5), sets, fs, 10000,
        0.01, Rng(500 + s), 2, false);
    bool xn_reject = false;
    for (const auto& cell : r.cells)
      if (cell.reject && cell.set_name.rfind("XN/", 0) == 0) xn_reject = true;
    if (xn_reject) ++rejected;
  }
  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "positive %s, %d/%d negative seeds rejected",
                pos_ok ? "pass" : "fail", rejected, seeds);
  report(8, "Cox reduction", pos_ok && rejected >= 19, secs, buf);
}

// 9. Bernoulli transport on Z2: the solved balance is preserving within
//    1e-12 and the size-biased law is exactly invariant under the coin.
void criterion_9() {
  const auto t0 = Clock::now();
  const auto* info = palm::find_scenario("bernoulli-z2");
  const TestReport r = palm::run_scenario(*info, 0, 0.01, 12, 1);
  double worst = 0.0;
  for (const auto& c : r.cells) worst = std::max(worst, c.statistic);
  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max exact gap %.2e", worst);
  report(9, "Bernoulli transport on Z2",
         r.verdict == Verdict::Pass && worst <= 1e-12, secs, buf);
}

// 10. Point-shift kernel identity on Z4: within 1e-12 for every shift under
//     the stationary field; violated for some shift under the pinned field.
void criterion_10() {
  const auto t0 = Clock::now();
  const auto* info = palm::find_scenario("kernel-identity-z4");
  const TestReport r = palm::run_scenario(*info, 0, 0.01, 13, 1);
  double stationary_gap = 0.0, pinned_gap = 0.0;
  for (const auto& c : r.cells) {
    if (c.set_name == "stationary_field") stationary_gap = c.statistic;
    if (c.set_name == "pinned_field") pinned_gap = c.statistic;
  }
  const double secs = since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "stationary gap %.2e, pinned gap %.3f",
                stationary_gap, pinned_gap);
  report(10, "kernel identity on Z4",
         r.verdict == Verdict::Pass && stationary_gap <= 1e-12 &&
             pinned_gap > 0.5,
         secs, buf);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
