#pragma once

#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "racelmpc/config.hpp"
#include "racelmpc/lmpc.hpp"
#include "racelmpc/safeset.hpp"

namespace racelmpc {

/// Per-lap diagnostics. Iteration 0 is the path-follower
/// initialization; its solver fields stay zero.
struct IterationReport {
  int iteration = 0;
  std::size_t crossing_index = 0;
  double lap_time_seconds = 0.0;
  double max_abs_e_y = 0.0;
  bool e_y_violation = false;  // any plant step beyond bound + 1e-3
  std::vector<double> nabla_v_x;  // one-step prediction errors per step
  std::vector<double> nabla_v_y;
  std::vector<double> nabla_yaw;
  int fallback_count = 0;
  int optimal_count = 0;
  int max_iter_count = 0;
  int infeasible_count = 0;
  double max_dynamics_residual = 0.0;  // over applied solutions

  double max_abs_nabla_v_x() const;
  double max_abs_nabla_v_y() const;
  double max_abs_nabla_yaw() const;
};

/// Per-control-step solver diagnostics.
struct SolverLogEntry {
  int step = 0;
  SolveStatus status = SolveStatus::kMaxIter;
  bool fallback = false;
  int sqp_iterations = 0;
  double objective = 0.0;
  double lambda = 0.0;
  double terminal_s = 0.0;
  double violation = 0.0;          // solver-reported
  double dynamics_residual = 0.0;  // recomputed from the solution
};

struct IterationResult {
  IterationReport report;
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  std::vector<SolverLogEntry> solver_log;
  bool crossed = false;
};

struct CampaignResult {
  std::vector<IterationReport> reports;  // [0] is the initialization lap
  bool converged = false;
  int iterations_run = 0;  // LMPC laps, excluding initialization
};

/// Starting state of every lap.
VehicleState start_state(const FullConfig& config);

/// Initialization lap under the path follower, from start to past the
/// runout. Throws std::runtime_error when it cannot cross.
IterationResult run_initialization(const FullConfig& config,
                                   const Track& track);

/// One LMPC lap: per-step identification, local safe-set approximation,
/// receding-horizon solve, plant step, then a path-follower runout.
/// `noise` may be null for the default noiseless plant.
IterationResult run_iteration(int iteration, const SafeSet& safeset,
                              const FullConfig& config, const Track& track,
                              std::mt19937* noise = nullptr);

/// Full campaign with persistence into run_dir (created if missing):
/// config.snapshot, iter_<j>/trajectory.csv, iter_<j>/report.json,
/// iter_<j>/solver_log.csv for LMPC laps, and summary.csv. Existing
/// iter_<j> directories are loaded and the campaign resumes after them.
CampaignResult run_campaign(const FullConfig& config,
                            const std::filesystem::path& run_dir,
                            std::ostream* progress = nullptr);

// Persistence helpers (formats documented in the README).
void write_trajectory_csv(const std::filesystem::path& file,
                          const std::vector<VehicleState>& states,
                          const std::vector<ControlInput>& inputs,
                          const std::vector<int>& cost_to_go);
std::pair<std::vector<VehicleState>, std::vector<ControlInput>>
read_trajectory_csv(const std::filesystem::path& file);
void write_report_json(const std::filesystem::path& file,
                       const IterationReport& report);
void write_solver_log_csv(const std::filesystem::path& file,
                          const std::vector<SolverLogEntry>& log);
void write_summary_csv(const std::filesystem::path& file,
                       const std::vector<IterationReport>& reports);

/// Rebuilds the safe set from iter_<j>/trajectory.csv files under
/// run_dir; returns the number of laps loaded.
std::size_t load_safe_set(const std::filesystem::path& run_dir,
                          double s_target, SafeSet& safeset);

}  // namespace racelmpc
