#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "palm/verify.hpp"

namespace palm {

/// Deterministic JSON form of a report: fixed key order, shortest
/// round-trip float formatting. Identical (config, seed) pairs produce
/// byte-identical files.
inline nlohmann::ordered_json report_to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["claim"] = r.claim_id;
  j["scenario"] = r.scenario;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["alpha"] = r.alpha;
  j["verdict"] = verdict_name(r.verdict);
  nlohmann::ordered_json tel;
  tel["draws"] = r.telemetry.draws;
  tel["fallback_events"] = r.telemetry.fallback_events;
  tel["fallback_rate"] = r.telemetry.fallback_rate();
  tel["censored_evals"] = r.telemetry.censored_evals;
  tel["censor_rate"] = r.telemetry.censor_rate();
  tel["rejected_draws"] = r.telemetry.rejected_draws;
  j["telemetry"] = std::move(tel);
  if (!r.note.empty()) j["note"] = r.note;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json cj;
    cj["set"] = c.set_name;
    cj["functional"] = c.functional_name;
    cj["shift"] = c.shift_name;
    cj["coordinate"] = c.coordinate;
    cj["metric"] = c.metric;
    cj["statistic"] = c.statistic;
    if (c.metric == "ks_p") cj["p_value"] = c.p_value;
    cj["reject"] = c.reject;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

/// Writes <stem>.report.json, <stem>.cells.tsv and <stem>.ecdf.tsv under
/// out_dir. The ECDF table holds empirical quantile pairs per cell, the
/// plot-ready companion of the report.
inline void write_report_files(const TestReport& r, const std::string& out_dir,
                               const std::string& stem) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / (stem + ".report.json"),
                    std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write report under " + out_dir);
    f << report_to_json(r).dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(out_dir) / (stem + ".cells.tsv"),
                    std::ios::binary | std::ios::trunc);
    f << "set\tfunctional\tshift\tcoordinate\tmetric\tstatistic\tp_value\treject\n";
    for (const auto& c : r.cells) {
      char line[512];
      std::snprintf(line, sizeof(line), "%s\t%s\t%s\t%d\t%s\t%.17g\t%.17g\t%d\n",
                    c.set_name.c_str(), c.functional_name.c_str(),
                    c.shift_name.c_str(), c.coordinate, c.metric.c_str(),
                    c.statistic, c.p_value, c.reject ? 1 : 0);
      f << line;
    }
  }
  {
    std::ofstream f(fs::path(out_dir) / (stem + ".ecdf.tsv"),
                    std::ios::binary | std::ios::trunc);
    f << "set\tfunctional\tshift\tcoordinate\tquantile\tlhs\trhs\n";
    for (const auto& c : r.cells) {
      const std::size_t k =
          std::min(c.lhs_quantiles.size(), c.rhs_quantiles.size());
      for (std::size_t i = 0; i < k; ++i) {
        char line[512];
        std::snprintf(line, sizeof(line), "%s\t%s\t%s\t%d\t%.6f\t%.17g\t%.17g\n",
                      c.set_name.c_str(), c.functional_name.c_str(),
                      c.shift_name.c_str(), c.coordinate,
                      (i + 0.5) / static_cast<double>(k), c.lhs_quantiles[i],
                      c.rhs_quantiles[i]);
        f << line;
      }
    }
  }
}

}  // namespace palm
