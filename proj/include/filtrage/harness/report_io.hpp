#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace filtrage::harness {

// One comparison between an estimate and its reference. The pass rule is
// |mc - oracle| <= max(se_multiplier * stderr, rel_tol * |oracle|); rows with
// a zero oracle and zero stderr therefore demand exact agreement.
struct ComparisonRow {
  std::string experiment;
  double t = 0.0;
  std::string quantity;
  double mc_estimate = 0.0;
  double stderr_val = 0.0;
  double oracle = 0.0;
  double abs_err = 0.0;
  bool pass = false;
};

inline ComparisonRow make_row(const std::string& experiment, double t, const std::string& quantity,
                              double mc, double se, double oracle, double se_multiplier,
                              double rel_tol) {
  ComparisonRow row{experiment, t, quantity, mc, se, oracle, std::abs(mc - oracle), false};
  row.pass = row.abs_err <= std::max(se_multiplier * se, rel_tol * std::abs(oracle));
  return row;
}

struct PlotPoint {
  double t = 0.0, mc = 0.0, oracle = 0.0, lo = 0.0, hi = 0.0;
};

struct PlotSeries {
  std::string quantity_slug;  // file name fragment, e.g. "B_F"
  std::vector<PlotPoint> points;
};

struct ExperimentReport {
  std::string name;
  std::string scenario;  // human-readable description of the modeled situation
  std::vector<ComparisonRow> rows;
  std::vector<PlotSeries> plots;
  double seconds = 0.0;
  nlohmann::json extras;  // experiment-specific diagnostics (KS statistics etc.)
};

inline bool report_passes(const ExperimentReport& rep) {
  return std::all_of(rep.rows.begin(), rep.rows.end(),
                     [](const ComparisonRow& r) { return r.pass; });
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// comparison.csv, summary.json and plotdata/*.csv under out_dir. Numeric
// fields round-trip exactly (%.17g), so reruns with the same seed produce
// byte-identical CSVs; summary.json additionally carries wall-clock timings.
inline void write_reports(const std::string& out_dir, const std::vector<ExperimentReport>& reports,
                          std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "plotdata");

  {
    std::ofstream csv(fs::path(out_dir) / "comparison.csv");
    if (!csv) throw std::runtime_error("cannot write comparison.csv under " + out_dir);
    csv << "experiment,t,quantity,mc_estimate,stderr,oracle,abs_err,pass\n";
    for (const auto& rep : reports)
      for (const auto& r : rep.rows)
        csv << r.experiment << ',' << detail::fmt(r.t) << ',' << r.quantity << ','
            << detail::fmt(r.mc_estimate) << ',' << detail::fmt(r.stderr_val) << ','
            << detail::fmt(r.oracle) << ',' << detail::fmt(r.abs_err) << ','
            << (r.pass ? "true" : "false") << '\n';
  }

  {
    nlohmann::json summary;
    summary["seed"] = seed;
    bool all = true;
    nlohmann::json exps = nlohmann::json::array();
    for (const auto& rep : reports) {
      std::size_t passed = 0;
      for (const auto& r : rep.rows) passed += r.pass ? 1 : 0;
      bool ok = report_passes(rep);
      all = all && ok;
      nlohmann::json e;
      e["name"] = rep.name;
      e["scenario"] = rep.scenario;
      e["rows"] = rep.rows.size();
      e["rows_passed"] = passed;
      e["pass"] = ok;
      e["seconds"] = rep.seconds;
      if (!rep.extras.is_null()) e["extras"] = rep.extras;
      exps.push_back(std::move(e));
    }
    summary["experiments"] = std::move(exps);
    summary["pass"] = all;
    std::ofstream js(fs::path(out_dir) / "summary.json");
    if (!js) throw std::runtime_error("cannot write summary.json under " + out_dir);
    js << summary.dump(2) << '\n';
  }

  for (const auto& rep : reports)
    for (const auto& plot : rep.plots) {
      std::ofstream csv(fs::path(out_dir) / "plotdata" / (rep.name + "_" + plot.quantity_slug + ".csv"));
      if (!csv) throw std::runtime_error("cannot write plotdata under " + out_dir);
      csv << "t,mc,oracle,lo,hi\n";
      for (const auto& pt : plot.points)
        csv << detail::fmt(pt.t) << ',' << detail::fmt(pt.mc) << ',' << detail::fmt(pt.oracle)
            << ',' << detail::fmt(pt.lo) << ',' << detail::fmt(pt.hi) << '\n';
    }
}

}  // namespace filtrage::harness
