#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "bilinear/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRunFailure = 2, kInvariantViolation = 3 };

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::string> out_dir;
  std::optional<std::string> methods;
  std::optional<std::size_t> threads;
};

bilinear::ExperimentConfig load_with_overrides(const RunArgs& a) {
  bilinear::ExperimentConfig c = bilinear::load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.reps) c.reps = *a.reps;
  if (a.out_dir) c.out_dir = *a.out_dir;
  if (a.threads) c.threads = *a.threads;
  if (a.methods) {
    c.methods.clear();
    std::stringstream ss(*a.methods);
    for (std::string name; std::getline(ss, name, ',');) {
      try {
        c.methods.push_back(bilinear::parse_method(name));
      } catch (const bilinear::InvalidInput& e) {
        throw bilinear::ConfigError("methods", e.what());
      }
    }
  }
  c.validate();
  return c;
}

void write_summary(const bilinear::AggregateResult& result, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::object();
  j["T"] = result.T;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : result.methods) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& g : m.grid) {
      grid.push_back({{"c", g.c}, {"T1", g.T1}, {"mean_final_regret", g.mean_final_regret},
                      {"failures", g.failures}});
    }
    j["methods"].push_back({{"method", std::string(bilinear::to_string(m.method))},
                            {"c", m.c},
                            {"T1", m.T1},
                            {"reps", m.reps.size()},
                            {"final_mean", m.mean.empty() ? 0.0 : m.mean.back()},
                            {"final_half_width", m.half_width.empty() ? 0.0 : m.half_width.back()},
                            {"failures", m.errors},
                            {"wall_seconds", m.wall_seconds},
                            {"grid", grid}});
  }
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw bilinear::Error("cannot write " + path.string());
}

int cmd_run(const RunArgs& args) {
  bilinear::ExperimentConfig config;
  try {
    config = load_with_overrides(args);
  } catch (const bilinear::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  try {
    const bilinear::AggregateResult result = bilinear::run_experiment(config);
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    bilinear::emit_csv(result, dir / "results.csv", config.csv_stride);
    bilinear::emit_plot(result, dir / "regret.svg");
    write_summary(result, dir / "summary.json");
    std::printf("%-8s %10s %6s %14s %12s %9s\n", "method", "c", "T1", "final regret", "95% half",
                "seconds");
    for (const auto& m : result.methods) {
      std::printf("%-8s %10g %6zu %14.4f %12.4f %9.1f\n",
                  std::string(bilinear::to_string(m.method)).c_str(), m.c, m.T1, m.mean.back(),
                  m.half_width.back(), m.wall_seconds);
    }
    std::printf("wrote %s\n", dir.string().c_str());
  } catch (const std::exception& e) {
    spdlog::error("run failed: {}", e.what());
    return kRunFailure;
  }
  return kOk;
}

int cmd_plot(const std::string& in, const std::string& out) {
  try {
    bilinear::emit_plot(bilinear::summarize(bilinear::load_csv(in)), out);
  } catch (const std::exception& e) {
    spdlog::error("plot failed: {}", e.what());
    return kRunFailure;
  }
  return kOk;
}

int cmd_check(const RunArgs& args) {
  bilinear::ExperimentConfig config;
  try {
    config = load_with_overrides(args);
  } catch (const bilinear::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  bilinear::InvariantReport report;
  try {
    report = bilinear::check_invariants(config);
  } catch (const std::exception& e) {
    spdlog::error("check failed: {}", e.what());
    return kRunFailure;
  }
  for (const std::string& v : report.violations) std::printf("VIOLATION %s\n", v.c_str());
  std::printf("%zu runs, %zu checks, %zu violations\n", report.runs, report.checks,
              report.violations.size());
  return report.ok() ? kOk : kInvariantViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilinear bandit experiments: ESTR, ISSE and OFUL"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV, SVG and a summary");
  run->add_option("--config", run_args.config, "JSON config file")->required();
  run->add_option("--seed", run_args.seed, "Override the master seed");
  run->add_option("--reps", run_args.reps, "Override the repetition count");
  run->add_option("--out-dir", run_args.out_dir, "Override the output directory");
  run->add_option("--methods", run_args.methods, "Comma-separated subset of oful,estr-os,estr-bm,isse");
  run->add_option("--threads", run_args.threads, "Worker threads (0 = all cores)");

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "Render a results CSV as an SVG regret plot");
  plot->add_option("--in", plot_in, "results.csv")->required();
  plot->add_option("--out", plot_out, "Output SVG path")->required();

  RunArgs check_args;
  auto* check = app.add_subcommand("check-invariants", "Run the per-run invariant suite");
  check->add_option("--config", check_args.config, "JSON config file")->required();
  check->add_option("--seed", check_args.seed, "Override the master seed");
  check->add_option("--reps", check_args.reps, "Override the number of instances");
  check->add_option("--threads", check_args.threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (*run) return cmd_run(run_args);
  if (*plot) return cmd_plot(plot_in, plot_out);
  return cmd_check(check_args);
}
