#include "racelmpc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "racelmpc/models.hpp"
#include "racelmpc/path_follower.hpp"
#include "racelmpc/sysid.hpp"

namespace racelmpc {

namespace {

constexpr double kAuditSlack = 1e-3;  // plant-side e_y audit tolerance

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

std::size_t crossing_of(const std::vector<VehicleState>& states,
                        double s_target) {
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t].s > s_target) {
      return t;
    }
  }
  return states.size();
}

}  // namespace

double IterationReport::max_abs_nabla_v_x() const { return max_abs(nabla_v_x); }
double IterationReport::max_abs_nabla_v_y() const { return max_abs(nabla_v_y); }
double IterationReport::max_abs_nabla_yaw() const { return max_abs(nabla_yaw); }

VehicleState start_state(const FullConfig& config) {
  VehicleState x;
  x.v_x = config.campaign.v_ref;
  return x;
}

namespace {

void audit_lap(IterationResult& result, const FullConfig& config) {
  double max_e_y = 0.0;
  for (const VehicleState& x : result.states) {
    max_e_y = std::max(max_e_y, std::abs(x.e_y));
  }
  result.report.max_abs_e_y = max_e_y;
  result.report.e_y_violation =
      max_e_y > config.lmpc.e_y_bound + kAuditSlack;
}

}  // namespace

IterationResult run_initialization(const FullConfig& config,
                                   const Track& track) {
  IterationResult result;
  result.report.iteration = 0;
  auto [states, inputs] = run_path_follower(
      track, config.vehicle, config.campaign.v_ref, config.path_follower,
      start_state(config), config.lmpc.dt,
      track.s_target() + track.tail_length());
  result.states = std::move(states);
  result.inputs = std::move(inputs);
  result.report.crossing_index = crossing_of(result.states, track.s_target());
  result.crossed = result.report.crossing_index < result.states.size();
  if (!result.crossed) {
    throw std::runtime_error("initialization lap did not cross the finish");
  }
  result.report.lap_time_seconds =
      static_cast<double>(result.report.crossing_index) * config.lmpc.dt;
  audit_lap(result, config);
  return result;
}

IterationResult run_iteration(int iteration, const SafeSet& safeset,
                              const FullConfig& config, const Track& track,
                              std::mt19937* noise) {
  if (safeset.empty()) {
    throw std::invalid_argument("run_iteration needs a non-empty safe set");
  }
  const LmpcConfig& lmpc_cfg = config.lmpc;
  const double dt = lmpc_cfg.dt;
  const int horizon = lmpc_cfg.horizon;

  IterationResult result;
  result.report.iteration = iteration;

  VehicleState x = start_state(config);
  result.states.push_back(x);

  // Warm start for the very first solve: follow the latest stored lap.
  const StoredIteration& latest = safeset.latest(0);
  OcpSolution first_guess;
  first_guess.lambda = 1.0;
  for (int k = 0; k < horizon; ++k) {
    const std::size_t idx =
        std::min<std::size_t>(k, latest.inputs.size() - 1);
    first_guess.inputs.push_back(latest.inputs[idx]);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  OcpSolution previous;
  bool have_previous = false;

  const std::size_t max_steps = 100000;
  while (x.s <= track.s_target()) {
    if (result.inputs.size() > max_steps) {
      throw std::runtime_error("iteration exceeded the step budget");
    }
    const RegressionProblem regression =
        build_regression(x, result.states, result.inputs, safeset,
                         config.sysid, dt, track);
    const ThetaParams theta = solve_theta(regression, config.sysid.ridge);
    const LocalApproximation approx =
        local_approximation(safeset, x, horizon);

    const ControlDecision decision = control_step(
        x, theta, approx, lmpc_cfg, config.vehicle, track,
        have_previous ? &previous : nullptr,
        have_previous ? nullptr : &first_guess);

    ControlInput applied = decision.input;
    if (noise != nullptr && config.campaign.input_noise_std > 0.0) {
      applied.accel += config.campaign.input_noise_std * gauss(*noise);
      applied.steer +=
          0.05 * config.campaign.input_noise_std * gauss(*noise);
      applied.accel = std::clamp(applied.accel, config.vehicle.accel_min,
                                 config.vehicle.accel_max);
      applied.steer = std::clamp(applied.steer, -config.vehicle.steer_max,
                                 config.vehicle.steer_max);
    }

    const VehicleState next =
        plant_step(x, applied, config.vehicle, track, dt);

    // One-step prediction error of the velocity states.
    const VehicleState predicted =
        decision.fallback
            ? predict(x, decision.input, theta, dt, track)
            : decision.solution.states[1];
    result.report.nabla_v_x.push_back(predicted.v_x - next.v_x);
    result.report.nabla_v_y.push_back(predicted.v_y - next.v_y);
    result.report.nabla_yaw.push_back(predicted.yaw_rate - next.yaw_rate);

    SolverLogEntry entry;
    entry.step = static_cast<int>(result.inputs.size());
    entry.status = decision.solution.status;
    entry.fallback = decision.fallback;
    entry.sqp_iterations = decision.solution.sqp_iterations;
    entry.objective = decision.solution.objective;
    entry.lambda = decision.solution.lambda;
    entry.terminal_s = decision.solution.states.back().s;
    entry.violation = decision.solution.max_violation;
    if (!decision.fallback) {
      double residual = 0.0;
      for (int k = 0; k < horizon; ++k) {
        const VehicleState model_next =
            predict(decision.solution.states[k], decision.solution.inputs[k],
                    theta, dt, track);
        residual = std::max(
            residual, (decision.solution.states[k + 1].vec() -
                       model_next.vec())
                          .cwiseAbs()
                          .maxCoeff());
      }
      entry.dynamics_residual = residual;
      result.report.max_dynamics_residual =
          std::max(result.report.max_dynamics_residual, residual);
    }
    result.solver_log.push_back(entry);

    if (decision.fallback) {
      ++result.report.fallback_count;
    }
    switch (decision.solution.status) {
      case SolveStatus::kOptimal:
        ++result.report.optimal_count;
        break;
      case SolveStatus::kMaxIter:
        ++result.report.max_iter_count;
        break;
      case SolveStatus::kInfeasible:
        ++result.report.infeasible_count;
        break;
    }

    previous = decision.solution;
    have_previous = true;
    result.inputs.push_back(applied);
    result.states.push_back(next);
    x = next;
  }

  result.report.crossing_index = crossing_of(result.states, track.s_target());
  result.crossed = true;
  result.report.lap_time_seconds =
      static_cast<double>(result.report.crossing_index) * dt;

  // Hand the vehicle back to the path follower for the runout so the
  // stored lap keeps going past the finish line.
  PathFollower runout(config.path_follower, config.vehicle, track,
                      config.campaign.v_ref);
  const double s_stop = track.s_target() + track.tail_length();
  while (x.s <= s_stop) {
    if (result.inputs.size() > max_steps) {
      throw std::runtime_error("runout exceeded the step budget");
    }
    const ControlInput input = runout.compute(x, dt);
    x = plant_step(x, input, config.vehicle, track, dt);
    result.inputs.push_back(input);
    result.states.push_back(x);
  }

  audit_lap(result, config);
  return result;
}

namespace {

std::filesystem::path iter_dir(const std::filesystem::path& run_dir, int j) {
  return run_dir / ("iter_" + std::to_string(j));
}

std::vector<int> cost_for(const std::vector<VehicleState>& states,
                          double s_target) {
  const std::size_t crossing = crossing_of(states, s_target);
  std::vector<int> cost(states.size(), 0);
  for (std::size_t t = 0; t < states.size(); ++t) {
    cost[t] = t < crossing ? static_cast<int>(crossing - t) : 0;
  }
  return cost;
}

void persist_iteration(const std::filesystem::path& run_dir, int j,
                       const IterationResult& result, double s_target) {
  const std::filesystem::path dir = iter_dir(run_dir, j);
  std::filesystem::create_directories(dir);
  write_trajectory_csv(dir / "trajectory.csv", result.states, result.inputs,
                       cost_for(result.states, s_target));
  write_report_json(dir / "report.json", result.report);
  if (!result.solver_log.empty()) {
    write_solver_log_csv(dir / "solver_log.csv", result.solver_log);
  }
}

}  // namespace

CampaignResult run_campaign(const FullConfig& config,
                            const std::filesystem::path& run_dir,
                            std::ostream* progress) {
  const Track track = config.make_track();
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream snapshot(run_dir / "config.snapshot");
    snapshot << config_to_json(config);
  }

  CampaignResult campaign;
  SafeSet safeset;
  const std::size_t preloaded =
      load_safe_set(run_dir, track.s_target(), safeset);

  std::mt19937 rng(config.campaign.seed);
  std::mt19937* noise =
      config.campaign.input_noise_std > 0.0 ? &rng : nullptr;

  int next_iteration = static_cast<int>(preloaded);
  if (preloaded == 0) {
    IterationResult init = run_initialization(config, track);
    safeset.add_iteration(init.states, init.inputs, track.s_target());
    persist_iteration(run_dir, 0, init, track.s_target());
    campaign.reports.push_back(init.report);
    if (progress != nullptr) {
      *progress << "iter 0 (init): " << init.report.crossing_index
                << " steps\n";
    }
    next_iteration = 1;
  } else if (progress != nullptr) {
    *progress << "resuming with " << preloaded << " stored laps\n";
  }

  std::vector<std::size_t> lap_steps;
  for (int j = next_iteration;
       j <= config.campaign.max_iterations; ++j) {
    IterationResult lap = run_iteration(j, safeset, config, track, noise);
    safeset.add_iteration(lap.states, lap.inputs, track.s_target());
    persist_iteration(run_dir, j, lap, track.s_target());
    campaign.reports.push_back(lap.report);
    ++campaign.iterations_run;
    lap_steps.push_back(lap.report.crossing_index);
    if (progress != nullptr) {
      *progress << "iter " << j << ": " << lap.report.crossing_index
                << " steps, fallbacks " << lap.report.fallback_count
                << ", max|e_y| " << lap.report.max_abs_e_y << "\n";
    }
    // Converged when the lap time has not moved a full control step
    // over three consecutive laps.
    if (lap_steps.size() >= 3) {
      const auto last = lap_steps.end();
      if (*(last - 1) == *(last - 2) && *(last - 2) == *(last - 3)) {
        campaign.converged = true;
        break;
      }
    }
  }

  write_summary_csv(run_dir / "summary.csv", campaign.reports);
  return campaign;
}

void write_trajectory_csv(const std::filesystem::path& file,
                          const std::vector<VehicleState>& states,
                          const std::vector<ControlInput>& inputs,
                          const std::vector<int>& cost_to_go) {
  if (states.size() != cost_to_go.size() ||
      inputs.size() + 1 != states.size()) {
    throw std::invalid_argument("trajectory arrays disagree on length");
  }
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << "t,v_x,v_y,yaw_rate,e_psi,e_y,s,a,delta,cost_to_go\n";
  for (std::size_t t = 0; t < states.size(); ++t) {
    const VehicleState& x = states[t];
    const double a = t < inputs.size() ? inputs[t].accel : 0.0;
    const double delta = t < inputs.size() ? inputs[t].steer : 0.0;
    out << t << ',' << format_double(x.v_x) << ',' << format_double(x.v_y)
        << ',' << format_double(x.yaw_rate) << ',' << format_double(x.e_psi)
        << ',' << format_double(x.e_y) << ',' << format_double(x.s) << ','
        << format_double(a) << ',' << format_double(delta) << ','
        << cost_to_go[t] << '\n';
  }
}

std::pair<std::vector<VehicleState>, std::vector<ControlInput>>
read_trajectory_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot read " + file.string());
  }
  std::string line;
  std::getline(in, line);  // header
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      values.push_back(std::stod(field));
    }
    if (values.size() != 10) {
      throw std::runtime_error("malformed trajectory row in " + file.string());
    }
    VehicleState x;
    x.v_x = values[1];
    x.v_y = values[2];
    x.yaw_rate = values[3];
    x.e_psi = values[4];
    x.e_y = values[5];
    x.s = values[6];
    states.push_back(x);
    inputs.push_back({values[7], values[8]});
  }
  if (states.empty()) {
    throw std::runtime_error("empty trajectory in " + file.string());
  }
  inputs.pop_back();  // final row carries no applied input
  return {std::move(states), std::move(inputs)};
}

void write_report_json(const std::filesystem::path& file,
                       const IterationReport& report) {
  nlohmann::json j;
  j["iteration"] = report.iteration;
  j["crossing_index"] = report.crossing_index;
  j["lap_time_seconds"] = report.lap_time_seconds;
  j["max_abs_e_y"] = report.max_abs_e_y;
  j["e_y_violation"] = report.e_y_violation;
  j["fallback_count"] = report.fallback_count;
  j["solver_status_counts"] = {{"optimal", report.optimal_count},
                               {"max_iter", report.max_iter_count},
                               {"infeasible", report.infeasible_count}};
  j["max_dynamics_residual"] = report.max_dynamics_residual;
  j["max_abs_nabla"] = {{"v_x", report.max_abs_nabla_v_x()},
                        {"v_y", report.max_abs_nabla_v_y()},
                        {"yaw_rate", report.max_abs_nabla_yaw()}};
  j["nabla_v_x"] = report.nabla_v_x;
  j["nabla_v_y"] = report.nabla_v_y;
  j["nabla_yaw_rate"] = report.nabla_yaw;
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << j.dump(2) << '\n';
}

void write_solver_log_csv(const std::filesystem::path& file,
                          const std::vector<SolverLogEntry>& log) {
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << "step,status,fallback,sqp_iterations,objective,lambda,terminal_s,"
         "violation,dynamics_residual\n";
  for (const SolverLogEntry& e : log) {
    const char* status = e.status == SolveStatus::kOptimal ? "optimal"
                         : e.status == SolveStatus::kMaxIter
                             ? "max_iter"
                             : "infeasible";
    out << e.step << ',' << status << ',' << (e.fallback ? 1 : 0) << ','
        << e.sqp_iterations << ',' << format_double(e.objective) << ','
        << format_double(e.lambda) << ',' << format_double(e.terminal_s)
        << ',' << format_double(e.violation) << ','
        << format_double(e.dynamics_residual) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& file,
                       const std::vector<IterationReport>& reports) {
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << "iteration,lap_steps,lap_time_s,max_abs_e_y,max_nabla_v_x,"
         "max_nabla_v_y,max_nabla_yaw_rate,fallbacks,optimal_steps,"
         "max_iter_steps,infeasible_steps\n";
  for (const IterationReport& r : reports) {
    out << r.iteration << ',' << r.crossing_index << ','
        << format_double(r.lap_time_seconds) << ','
        << format_double(r.max_abs_e_y) << ','
        << format_double(r.max_abs_nabla_v_x()) << ','
        << format_double(r.max_abs_nabla_v_y()) << ','
        << format_double(r.max_abs_nabla_yaw()) << ',' << r.fallback_count
        << ',' << r.optimal_count << ',' << r.max_iter_count << ','
        << r.infeasible_count << '\n';
  }
}

std::size_t load_safe_set(const std::filesystem::path& run_dir,
                          double s_target, SafeSet& safeset) {
  std::size_t count = 0;
  while (true) {
    const std::filesystem::path file =
        iter_dir(run_dir, static_cast<int>(count)) / "trajectory.csv";
    if (!std::filesystem::exists(file)) {
      break;
    }
    auto [states, inputs] = read_trajectory_csv(file);
    safeset.add_iteration(std::move(states), std::move(inputs), s_target);
    ++count;
  }
  return count;
}

}  // namespace racelmpc
