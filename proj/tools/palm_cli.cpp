// Scenario runner for the typicality verification suite: executes shipped
// exact and Monte Carlo claim checks from declarative configs and writes
// reports plus plot-ready tables.
//
// Exit codes for `run`: 0 all verdicts as expected, 1 bad config or usage,
// 2 a verdict contradicts the scenario's expectation, 3 inconclusive.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "palm/config.hpp"
#include "palm/report.hpp"
#include "palm/scenarios.hpp"

namespace {

struct RunRequest {
  const palm::ScenarioInfo* scenario = nullptr;           // registry mode
  std::optional<palm::cfg::SuiteConfig> suite;            // declarative mode
  std::optional<long> n;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> expect;  // overrides the registry expectation
};

RunRequest parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("malformed config: not an object");
  if (j.value("schema", 0) != 1)
    throw std::runtime_error("unsupported config schema (want 1)");
  if (j.contains("suite")) {
    RunRequest req;
    req.suite = palm::cfg::parse_suite_config(j);
    req.seed = req.suite->seed;
    if (req.suite->suite.find("exact") == std::string::npos && !req.seed)
      throw std::runtime_error("mc suites require a seed in the config");
    return req;
  }
  if (!j.contains("scenario") || !j["scenario"].is_string())
    throw std::runtime_error("config missing scenario name");
  static const std::set<std::string> known = {"schema", "scenario", "seed",
                                              "n",      "alpha",    "out",
                                              "expect"};
  for (const auto& [key, unused] : j.items())
    if (!known.count(key)) throw std::runtime_error("unknown config key: " + key);
  RunRequest req;
  const std::string name = j["scenario"].get<std::string>();
  req.scenario = palm::find_scenario(name);
  if (!req.scenario) throw std::runtime_error("unknown scenario: " + name);
  if (j.contains("n")) req.n = j["n"].get<long>();
  if (j.contains("alpha")) req.alpha = j["alpha"].get<double>();
  if (j.contains("seed")) req.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("expect")) {
    req.expect = j["expect"].get<std::string>();
    if (*req.expect != "pass" && *req.expect != "fail")
      throw std::runtime_error("expect must be \"pass\" or \"fail\"");
  }
  if (req.scenario->mode == "mc" && !req.seed)
    throw std::runtime_error("mc scenarios require a seed in the config");
  return req;
}

int score(const palm::TestReport& report, const std::string& expectation) {
  const bool expected_fail = expectation == "fail";
  switch (report.verdict) {
    case palm::Verdict::Pass:
      return expected_fail ? 2 : 0;
    case palm::Verdict::Fail:
      return expected_fail ? 0 : 2;
    case palm::Verdict::Inconclusive:
      return 3;
  }
  return 1;
}

int run_one(const RunRequest& req, std::optional<std::uint64_t> seed_override,
            const std::string& out_dir, int jobs) {
  if (req.suite) {
    const auto& sc = *req.suite;
    const std::uint64_t seed = seed_override.value_or(req.seed.value_or(1));
    const palm::TestReport report = palm::cfg::run_suite_config(sc, seed, jobs);
    const std::string dir = out_dir.empty() ? std::string("out/") + sc.name : out_dir;
    palm::write_report_files(report, dir, sc.name);
    std::printf("%-34s claim=%-9s verdict=%-12s expected=%s\n", sc.name.c_str(),
                report.claim_id.c_str(), palm::verdict_name(report.verdict),
                sc.expect.c_str());
    std::printf("  report: %s/%s.report.json\n", dir.c_str(), sc.name.c_str());
    return score(report, sc.expect);
  }
  const palm::ScenarioInfo& info = *req.scenario;
  const long n = req.n.value_or(info.default_n);
  const double alpha = req.alpha.value_or(info.default_alpha);
  const std::uint64_t seed = seed_override.value_or(req.seed.value_or(1));

  const palm::TestReport report = palm::run_scenario(info, n, alpha, seed, jobs);
  const std::string dir =
      out_dir.empty() ? std::string("out/") + info.name : out_dir;
  palm::write_report_files(report, dir, info.name);

  const std::string expectation = req.expect.value_or(info.expect);
  std::printf("%-34s claim=%-9s verdict=%-12s expected=%s\n", info.name.c_str(),
              info.claim_id.c_str(), palm::verdict_name(report.verdict),
              expectation.c_str());
  if (report.telemetry.fallback_events > 0 || report.telemetry.censored_evals > 0)
    std::printf("  telemetry: fallback_rate=%.4f censor_rate=%.4f\n",
                report.telemetry.fallback_rate(), report.telemetry.censor_rate());
  std::printf("  report: %s/%s.report.json\n", dir.c_str(), info.name.c_str());
  return score(report, expectation);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "palm: exact and Monte Carlo checks of typical locations in random "
      "measures on finite groups and tori"};
  app.require_subcommand(1);

  std::string run_target;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  int jobs = 1;
  auto* run_cmd = app.add_subcommand(
      "run", "Run a scenario from a JSON config file or by registry name");
  run_cmd->add_option("config", run_target, "Config path or shipped scenario name")
      ->required();
  run_cmd->add_option("--seed", seed_override, "Override the seed");
  run_cmd->add_option("--out", out_dir, "Output directory (default out/<name>)");
  run_cmd->add_option("--jobs", jobs, "Worker threads for Monte Carlo draws")
      ->check(CLI::Range(1, 64));

  auto* list_cmd = app.add_subcommand("list", "List the shipped scenarios");

  std::string describe_id;
  auto* describe_cmd =
      app.add_subcommand("describe", "Describe a claim id or scenario");
  describe_cmd->add_option("id", describe_id, "Claim id (e.g. thm-2.4) or scenario")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      RunRequest req;
      if (std::filesystem::exists(run_target)) {
        req = parse_config_file(run_target);
      } else if (const auto* info = palm::find_scenario(run_target)) {
        req.scenario = info;
      } else {
        std::fprintf(stderr, "error: no such config file or scenario: %s\n",
                     run_target.c_str());
        return 1;
      }
      return run_one(req, seed_override, out_dir, jobs);
    }
    if (list_cmd->parsed()) {
      std::printf("%-34s %-9s %-6s %-6s %s\n", "scenario", "claim", "mode",
                  "expect", "description");
      for (const auto& s : palm::scenario_registry()) {
        std::string desc = s.description.substr(0, 80);
        if (s.description.size() > 80) desc += "...";
        std::printf("%-34s %-9s %-6s %-6s %s\n", s.name.c_str(),
                    s.claim_id.c_str(), s.mode.c_str(), s.expect.c_str(),
                    desc.c_str());
      }
      return 0;
    }
    if (describe_cmd->parsed()) {
      const auto& claims = palm::claim_descriptions();
      if (auto it = claims.find(describe_id); it != claims.end()) {
        std::printf("%s\n  %s\n  scenarios:\n", it->first.c_str(),
                    it->second.c_str());
        for (const auto& s : palm::scenario_registry())
          if (s.claim_id == it->first)
            std::printf("    %-34s expect=%s\n", s.name.c_str(), s.expect.c_str());
        return 0;
      }
      if (const auto* info = palm::find_scenario(describe_id)) {
        std::printf("%s (claim %s, %s, expect %s)\n  %s\n", info->name.c_str(),
                    info->claim_id.c_str(), info->mode.c_str(),
                    info->expect.c_str(), info->description.c_str());
        return 0;
      }
      std::fprintf(stderr, "error: unknown claim or scenario: %s\n",
                   describe_id.c_str());
      return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
