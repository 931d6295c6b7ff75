#include <chrono>
#include <exception>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "racelmpc/config.hpp"
#include "racelmpc/harness.hpp"
#include "racelmpc/plots.hpp"

namespace {

racelmpc::FullConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    return racelmpc::default_config();
  }
  return racelmpc::load_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-lap-time learning MPC on a single-corner track"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir = "run_out";
  int iters = -1;

  CLI::App* init = app.add_subcommand(
      "init", "Drive the initialization lap and store it as iteration 0");
  init->add_option("--config", config_path, "JSON config file");
  init->add_option("--run-dir", run_dir, "output directory");

  CLI::App* run = app.add_subcommand(
      "run", "Run the learning campaign (initializes when needed)");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--run-dir", run_dir, "output directory");
  run->add_option("--iters", iters, "iteration budget (overrides config)");

  CLI::App* report = app.add_subcommand(
      "report", "Write summary plots for a finished run directory");
  report->add_option("--run-dir", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) {
      racelmpc::FullConfig config = load_or_default(config_path);
      config.campaign.max_iterations = 0;
      racelmpc::run_campaign(config, run_dir, &std::cout);
      std::cout << "initialization lap stored under " << run_dir << "\n";
    } else if (run->parsed()) {
      racelmpc::FullConfig config = load_or_default(config_path);
      if (iters >= 0) {
        config.campaign.max_iterations = iters;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const racelmpc::CampaignResult result =
          racelmpc::run_campaign(config, run_dir, &std::cout);
      const auto elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      std::cout << "campaign finished: " << result.iterations_run
                << " LMPC laps, "
                << (result.converged ? "converged" : "budget reached")
                << ", wall time " << elapsed << " s\n";
      if (!result.reports.empty()) {
        std::cout << "final lap: " << result.reports.back().crossing_index
                  << " steps ("
                  << result.reports.back().lap_time_seconds << " s)\n";
      }
    } else if (report->parsed()) {
      racelmpc::write_run_plots(run_dir);
      std::cout << "plots written under " << run_dir << "\n";
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
