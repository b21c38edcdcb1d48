#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "palm/scenarios.hpp"

namespace palm {

/// Declarative suite configs: instead of naming a shipped scenario, a config
/// may assemble a run from registry pieces. Example:
///
///   {"schema": 1, "suite": "shift_invariance",
///    "group": {"kind": "torus", "d": 1, "L": 10.0},
///    "process": {"kind": "poisson_palm", "intensity": 1.0},
///    "rules": [{"kind": "tn", "n": 1}, {"kind": "tn", "n": -1}],
///    "functionals": ["count:1", "nn:2"],
///    "n": 5000, "alpha": 0.01, "seed": 7, "expect": "pass"}
///
/// Group descriptors follow the documented forms {"kind":"cyclic","n":6},
/// {"kind":"table","cayley":[[...]]} and {"kind":"torus","d":2,"L":10.0}.
namespace cfg {

inline Group parse_group(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("group descriptor needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cyclic") return Group::cyclic(j.at("n").get<int>());
  if (kind == "s3") return Group::symmetric3();
  if (kind == "table")
    return Group::from_table(j.at("cayley").get<std::vector<std::vector<int>>>());
  if (kind == "torus")
    return Group::torus(j.at("d").get<int>(), j.at("L").get<double>());
  throw std::runtime_error("unknown group kind: " + kind);
}

inline MeasurableSet parse_set(const nlohmann::json& j, const Group& g) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("set descriptor needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "all") return MeasurableSet::all(g);
  if (kind == "elements")
    return MeasurableSet::of_elements(g, j.at("indices").get<std::vector<int>>());
  if (kind == "box")
    return MeasurableSet::box(g, j.at("corner").get<std::vector<double>>(),
                              j.at("extent").get<std::vector<double>>());
  throw std::runtime_error("unknown set kind: " + kind);
}

inline ScenarioSampler parse_process(const nlohmann::json& j, const Group& g) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("process descriptor needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "poisson_palm") {
    const double intensity = j.at("intensity").get<double>();
    ScenarioSampler s;
    s.name = "poisson_palm";
    s.claims_mass_stationary = true;
    s.intensity = intensity;
    s.draw = [g, intensity](Rng& r) { return palm_of_poisson(g, intensity, r); };
    return s;
  }
  if (kind == "poisson_counts") {
    const double intensity = j.at("intensity").get<double>();
    ScenarioSampler s;
    s.name = "poisson_counts";
    s.claims_stationary = true;
    s.intensity = intensity;
    s.draw = [g, intensity](Rng& r) {
      return Configuration(sample_poisson_counts(g, intensity, r));
    };
    return s;
  }
  if (kind == "cosine_palm")
    return cosine_palm_sampler(g.side(), j.value("cells", 50),
                               j.at("amplitude").get<double>(),
                               j.value("offset", 0.0));
  if (kind == "block_palm")
    return step_palm_sampler(g.side(), j.value("cells", 50),
                             j.at("lo").get<double>(), j.at("hi").get<double>(),
                             j.at("block_width").get<double>(),
                             j.value("offset", 0.0));
  if (kind == "windowed_tree")
    return windowed_tree_sampler(j.at("window_half").get<double>(),
                                 j.at("intensity").get<double>(),
                                 j.value("buffer", 8.0));
  throw std::runtime_error("unknown process kind: " + kind);
}

inline ShiftRule parse_rule(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("rule descriptor needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tn") return make_tn_rule(j.at("n").get<long>());
  if (kind == "nearest") return make_nearest_rule();
  if (kind == "matching") return make_matching_rule();
  if (kind == "marked_tn") return make_marked_tn_rule(j.value("reversed", false));
  if (kind == "lex") return make_circular_lex_rule(j.value("reversed", false));
  if (kind == "tree") {
    if (j.contains("max_step"))
      return make_tree_rule_capped(j.at("max_step").get<double>());
    return make_tree_rule();
  }
  if (kind == "tree_reverse") return make_tree_reverse_rule();
  if (kind == "bernoulli") {
    ShiftRule base = parse_rule(j.at("base"));
    const double stay = j.at("stay").get<double>();
    if (stay < 0.0 || stay > 1.0)
      throw std::runtime_error("bernoulli stay probability outside [0,1]");
    return bernoulli_transport(std::move(base),
                               [stay](const Configuration&) { return stay; });
  }
  throw std::runtime_error("unknown rule kind: " + kind);
}

/// Exact finite configuration distributions for the exact suites.
inline ConfigDist parse_exact_dist(const nlohmann::json& j, const Group& g) {
  if (!j.is_object() || !j.contains("kind"))
    throw std::runtime_error("distribution descriptor needs a kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rotated_weights_palm") {
    const auto w = j.at("weights").get<std::vector<double>>();
    return palm_size_biased_exact(
        uniform_translates(Configuration(PointMeasure::from_weights(g, w))));
  }
  if (kind == "mixture") {
    ConfigDist d;
    for (const auto& item : j.at("components")) {
      const auto w = item.at("weights").get<std::vector<double>>();
      d.add(Configuration(PointMeasure::from_weights(g, w)),
            item.at("prob").get<double>());
    }
    return d;
  }
  throw std::runtime_error("unknown distribution kind: " + kind);
}

struct SuiteConfig {
  std::string name = "custom";
  std::string suite;
  std::string expect = "pass";
  long n = 5000;
  double alpha = 0.01;
  std::optional<std::uint64_t> seed;
  nlohmann::json raw;
};

inline SuiteConfig parse_suite_config(const nlohmann::json& j) {
  SuiteConfig c;
  c.raw = j;
  c.suite = j.at("suite").get<std::string>();
  c.name = j.value("name", std::string("custom-") + c.suite);
  c.expect = j.value("expect", std::string("pass"));
  if (c.expect != "pass" && c.expect != "fail")
    throw std::runtime_error("expect must be \"pass\" or \"fail\"");
  c.n = j.value("n", 5000L);
  c.alpha = j.value("alpha", 0.01);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline TestReport run_suite_config(const SuiteConfig& c, std::uint64_t seed,
                                   int jobs) {
  const nlohmann::json& j = c.raw;
  const Group g = parse_group(j.at("group"));
  TestReport r;
  if (c.suite == "mass_stationarity") {
    const ScenarioSampler s = parse_process(j.at("process"), g);
    std::vector<std::pair<std::string, MeasurableSet>> sets;
    int idx = 0;
    for (const auto& sj : j.at("sets"))
      sets.push_back({"C" + std::to_string(idx++), parse_set(sj, g)});
    std::vector<Functional> fs;
    for (const auto& fj : j.at("functionals"))
      fs.push_back(make_functional(fj.get<std::string>(), g));
    r = mass_stationarity_test_mc(s, sets, fs, c.n, c.alpha, Rng(seed), jobs);
  } else if (c.suite == "shift_invariance") {
    const ScenarioSampler s = parse_process(j.at("process"), g);
    std::vector<Functional> fs;
    for (const auto& fj : j.at("functionals"))
      fs.push_back(make_functional(fj.get<std::string>(), g));
    std::optional<BackgroundKind> bg;
    if (j.contains("background"))
      bg = background_kind_from_name(j.at("background").get<std::string>());
    const auto rules = j.at("rules");
    const double sub_alpha = c.alpha / rules.size();
    bool any = false;
    long label = 0;
    for (const auto& rj : rules) {
      TestReport sub = shift_invariance_test(parse_rule(rj), s, fs, c.n,
                                             sub_alpha, Rng(seed).fork(label++),
                                             jobs, bg);
      for (auto& cell : sub.cells) {
        any |= cell.reject;
        r.cells.push_back(std::move(cell));
      }
      r.telemetry.draws += sub.telemetry.draws;
      r.telemetry.censored_evals += sub.telemetry.censored_evals;
    }
    r.mode = "mc";
    if (any)
      r.verdict = Verdict::Fail;
    else
      r.verdict = r.telemetry.censor_rate() > 0.05 ? Verdict::Inconclusive
                                                   : Verdict::Pass;
  } else if (c.suite == "mass_stationarity_exact") {
    const ConfigDist dist = parse_exact_dist(j.at("distribution"), g);
    std::vector<std::pair<std::string, MeasurableSet>> sets;
    int idx = 0;
    for (const auto& sj : j.at("sets"))
      sets.push_back({"C" + std::to_string(idx++), parse_set(sj, g)});
    r = mass_stationarity_test_exact(dist, sets);
  } else if (c.suite == "stationarity_exact") {
    const ConfigDist dist = parse_exact_dist(j.at("distribution"), g);
    std::vector<GroupElement> ts;
    for (int i = 0; i < g.order(); ++i) ts.push_back(g.element(i));
    r = stationarity_test_exact(dist, ts);
  } else {
    throw std::runtime_error("unknown suite: " + c.suite);
  }
  r.claim_id = j.value("claim", std::string("custom"));
  r.scenario = c.name;
  r.seed = seed;
  if (r.n == 0) r.n = c.n;
  if (r.alpha == 0.0) r.alpha = c.alpha;
  return r;
}

}  // namespace cfg
}  // namespace palm
