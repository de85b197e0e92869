// command line front end: simulate paths, run the comparison suite, or verify
// a subset of experiments against their oracles
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "filtrage/harness/config.hpp"
#include "filtrage/harness/registry.hpp"
#include "filtrage/harness/report_io.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitToleranceFail = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

using filtrage::harness::Config;

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  return Config::from_file(path);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::string item = s.substr(pos, comma - pos);
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

int run_and_report(const Config& cfg, const std::vector<std::string>& only,
                   const std::string& out_dir) {
  std::uint64_t seed = filtrage::harness::resolve_seed(cfg);
  auto reports = filtrage::harness::run_selected(cfg, seed, only);
  filtrage::harness::write_reports(out_dir, reports, seed);
  bool all_pass = true;
  for (const auto& rep : reports) {
    bool ok = filtrage::harness::report_passes(rep);
    std::printf("%-18s %4zu rows  %s  (%.1fs)\n", rep.name.c_str(), rep.rows.size(),
                ok ? "pass" : "FAIL", rep.seconds);
    all_pass = all_pass && ok;
  }
  std::printf("reports written to %s\n", out_dir.c_str());
  return all_pass ? kExitPass : kExitToleranceFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filtration shrinkage experiment harness"};
  app.require_subcommand(1);

  std::string cfg_path, out_dir, experiment, only_csv;

  auto* sim = app.add_subcommand("simulate", "simulate one experiment and write path summaries");
  sim->add_option("--config", cfg_path, "key=value config file");
  sim->add_option("--experiment", experiment, "experiment name")->required();
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* run = app.add_subcommand("run", "run every experiment and write comparison reports");
  run->add_option("--config", cfg_path, "key=value config file");
  run->add_option("--out", out_dir, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "run selected experiments and write reports");
  verify->add_option("--config", cfg_path, "key=value config file");
  verify->add_option("--only", only_csv, "comma-separated experiment names");
  verify->add_option("--out", out_dir, "output directory")->required();

  auto* list = app.add_subcommand("list", "list experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& def : filtrage::harness::experiment_registry())
        std::printf("%-18s %s\n", def.name.c_str(), def.scenario.c_str());
      return kExitPass;
    }
    Config cfg = load_config(cfg_path);
    if (sim->parsed()) {
      std::uint64_t seed = filtrage::harness::resolve_seed(cfg);
      filtrage::harness::simulate_only(cfg, experiment, seed, out_dir);
      std::printf("paths written to %s\n", out_dir.c_str());
      return kExitPass;
    }
    if (run->parsed()) return run_and_report(cfg, {}, out_dir);
    return run_and_report(cfg, split_csv(only_csv), out_dir);
  } catch (const filtrage::harness::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntimeError;
  }
}
