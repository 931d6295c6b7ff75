#include "racelmpc/lmpc.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace racelmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

struct OcpData {
  VehicleState x0;
  ThetaParams theta;
  LocalApproximation approx;
  LmpcConfig config;
  VehicleParams params;
  const Track* track = nullptr;
};

Eigen::VectorXd OcpSolution::pack(int horizon) const {
  Eigen::VectorXd z(ocp_num_vars(horizon));
  for (int k = 0; k <= horizon; ++k) {
    z.segment<6>(ocp_state_index(horizon, k)) = states[k].vec();
  }
  for (int k = 0; k < horizon; ++k) {
    z[ocp_input_index(horizon, k)] = inputs[k].accel;
    z[ocp_input_index(horizon, k) + 1] = inputs[k].steer;
  }
  z[ocp_lambda_index(horizon)] = lambda;
  return z;
}

OcpSolution OcpSolution::unpack(const Eigen::VectorXd& z, int horizon) {
  OcpSolution sol;
  sol.states.resize(horizon + 1);
  sol.inputs.resize(horizon);
  for (int k = 0; k <= horizon; ++k) {
    sol.states[k] =
        VehicleState::from_vec(z.segment<6>(ocp_state_index(horizon, k)));
  }
  for (int k = 0; k < horizon; ++k) {
    sol.inputs[k] = {z[ocp_input_index(horizon, k)],
                     z[ocp_input_index(horizon, k) + 1]};
  }
  sol.lambda = z[ocp_lambda_index(horizon)];
  return sol;
}

namespace {

double blended_cost(const OcpData& d, double s, double lambda) {
  return lambda * d.approx.prev1.cost_poly.value(s) +
         (1.0 - lambda) * d.approx.prev2.cost_poly.value(s);
}

Eigen::VectorXd ocp_objective_gradient(const OcpData& d,
                                       const Eigen::VectorXd& z) {
  const int n = d.config.horizon;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(z.size());
  const int s_idx = ocp_state_index(n, n) + 5;
  const int l_idx = ocp_lambda_index(n);
  const double s = z[s_idx];
  const double lambda = z[l_idx];
  grad[s_idx] = lambda * d.approx.prev1.cost_poly.deriv(s) +
                (1.0 - lambda) * d.approx.prev2.cost_poly.deriv(s);
  grad[l_idx] = d.approx.prev1.cost_poly.value(s) -
                d.approx.prev2.cost_poly.value(s);
  for (int k = 0; k + 1 < n; ++k) {
    const int a = ocp_input_index(n, k);
    const int b = ocp_input_index(n, k + 1);
    for (int ch = 0; ch < 2; ++ch) {
      const double diff = z[b + ch] - z[a + ch];
      grad[a + ch] += -2.0 * d.config.rate_eps * diff;
      grad[b + ch] += 2.0 * d.config.rate_eps * diff;
    }
  }
  return grad;
}

Eigen::MatrixXd ocp_hessian(const OcpData& d, const Eigen::VectorXd& z) {
  const int n = d.config.horizon;
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(z.size(), z.size());
  for (int k = 0; k + 1 < n; ++k) {
    const int a = ocp_input_index(n, k);
    const int b = ocp_input_index(n, k + 1);
    for (int ch = 0; ch < 2; ++ch) {
      hess(a + ch, a + ch) += 2.0 * d.config.rate_eps;
      hess(b + ch, b + ch) += 2.0 * d.config.rate_eps;
      hess(a + ch, b + ch) -= 2.0 * d.config.rate_eps;
      hess(b + ch, a + ch) -= 2.0 * d.config.rate_eps;
    }
  }

  // Curvature of the blended terminal cost in (s_N, lambda), projected
  // onto the positive-semidefinite cone.
  const int s_idx = ocp_state_index(n, n) + 5;
  const int l_idx = ocp_lambda_index(n);
  const double s = z[s_idx];
  const double lambda = z[l_idx];
  const double f_ss = lambda * d.approx.prev1.cost_poly.second_deriv(s) +
                      (1.0 - lambda) * d.approx.prev2.cost_poly.second_deriv(s);
  const double f_sl = d.approx.prev1.cost_poly.deriv(s) -
                      d.approx.prev2.cost_poly.deriv(s);
  const double trace = f_ss;
  const double disc = std::sqrt(f_ss * f_ss / 4.0 + f_sl * f_sl);
  const double eig1 = trace / 2.0 + disc;
  const double eig2 = trace / 2.0 - disc;
  // Eigenvectors of [[f_ss, f_sl], [f_sl, 0]].
  auto add_clamped = [&](double eig, double vx, double vy) {
    if (eig <= 0.0) {
      return;
    }
    const double norm = std::hypot(vx, vy);
    if (norm < 1e-300) {
      return;
    }
    vx /= norm;
    vy /= norm;
    hess(s_idx, s_idx) += eig * vx * vx;
    hess(s_idx, l_idx) += eig * vx * vy;
    hess(l_idx, s_idx) += eig * vx * vy;
    hess(l_idx, l_idx) += eig * vy * vy;
  };
  if (std::abs(f_sl) < 1e-300) {
    add_clamped(f_ss, 1.0, 0.0);
  } else {
    add_clamped(eig1, eig1, f_sl);
    add_clamped(eig2, eig2, f_sl);
  }
  return hess;
}

Eigen::VectorXd ocp_equality(const OcpData& d, const Eigen::VectorXd& z) {
  const int n = d.config.horizon;
  Eigen::VectorXd c(6 * n + 5);
  for (int k = 0; k < n; ++k) {
    const VehicleState xk =
        VehicleState::from_vec(z.segment<6>(ocp_state_index(n, k)));
    const ControlInput uk{z[ocp_input_index(n, k)],
                          z[ocp_input_index(n, k) + 1]};
    const VehicleState pred =
        predict(xk, uk, d.theta, d.config.dt, *d.track);
    c.segment<6>(6 * k) =
        z.segment<6>(ocp_state_index(n, k + 1)) - pred.vec();
  }
  const double s = z[ocp_state_index(n, n) + 5];
  const double lambda = z[ocp_lambda_index(n)];
  for (int i = 0; i < 5; ++i) {
    const double target =
        lambda * d.approx.prev1.state_polys[i].value(s) +
        (1.0 - lambda) * d.approx.prev2.state_polys[i].value(s);
    c[6 * n + i] = z[ocp_state_index(n, n) + i] - target;
  }
  return c;
}

Eigen::MatrixXd ocp_equality_jacobian(const OcpData& d,
                                      const Eigen::VectorXd& z) {
  const int n = d.config.horizon;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6 * n + 5, z.size());
  Eigen::Matrix<double, 6, 6> d_state;
  Eigen::Matrix<double, 6, 2> d_input;
  for (int k = 0; k < n; ++k) {
    const VehicleState xk =
        VehicleState::from_vec(z.segment<6>(ocp_state_index(n, k)));
    const ControlInput uk{z[ocp_input_index(n, k)],
                          z[ocp_input_index(n, k) + 1]};
    predict_jacobians(xk, uk, d.theta, d.config.dt, *d.track, d_state,
                      d_input);
    jac.block<6, 6>(6 * k, ocp_state_index(n, k + 1)).setIdentity();
    jac.block<6, 6>(6 * k, ocp_state_index(n, k)) = -d_state;
    jac.block<6, 2>(6 * k, ocp_input_index(n, k)) = -d_input;
  }
  const int s_idx = ocp_state_index(n, n) + 5;
  const int l_idx = ocp_lambda_index(n);
  const double s = z[s_idx];
  const double lambda = z[l_idx];
  for (int i = 0; i < 5; ++i) {
    const auto& p1 = d.approx.prev1.state_polys[i];
    const auto& p2 = d.approx.prev2.state_polys[i];
    jac(6 * n + i, ocp_state_index(n, n) + i) += 1.0;
    jac(6 * n + i, s_idx) -=
        lambda * p1.deriv(s) + (1.0 - lambda) * p2.deriv(s);
    jac(6 * n + i, l_idx) -= p1.value(s) - p2.value(s);
  }
  return jac;
}

}  // namespace

Ocp build_ocp(const VehicleState& x_t, const ThetaParams& theta,
              const LocalApproximation& approx, const LmpcConfig& config,
              const VehicleParams& params, const Track& track) {
  if (config.horizon < 2) {
    throw std::invalid_argument("horizon must be >= 2");
  }
  double max_kappa = 0.0;
  for (const TrackSegment& seg : track.segments()) {
    max_kappa = std::max(max_kappa, std::abs(seg.curvature));
  }
  if (config.e_y_bound * max_kappa >= 1.0) {
    throw std::invalid_argument(
        "e_y bound reaches the curvilinear singularity");
  }

  auto data = std::make_shared<OcpData>();
  data->x0 = x_t;
  data->theta = theta;
  data->approx = approx;
  data->config = config;
  data->params = params;
  data->track = &track;

  const int n = config.horizon;
  Ocp ocp;
  ocp.horizon = n;
  ocp.data = data;
  ocp.nlp.num_vars = ocp_num_vars(n);
  ocp.nlp.num_eq = 6 * n + 5;

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(ocp.nlp.num_vars, -kInf);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(ocp.nlp.num_vars, kInf);
  // Initial condition as a pinned variable block.
  lower.segment<6>(ocp_state_index(n, 0)) = x_t.vec();
  upper.segment<6>(ocp_state_index(n, 0)) = x_t.vec();
  for (int k = 1; k <= n; ++k) {
    const int xi = ocp_state_index(n, k);
    lower[xi + 0] = kVxMin;
    upper[xi + 0] = config.v_x_max;
    if (k < n) {
      lower[xi + 4] = -config.e_y_bound;
      upper[xi + 4] = config.e_y_bound;
      lower[xi + 5] = 0.0;
      upper[xi + 5] = track.total_length();
    }
  }
  // Terminal s stays inside the shared fit window.
  const int s_term = ocp_state_index(n, n) + 5;
  lower[s_term] = std::max(approx.s_lo(), 0.0);
  upper[s_term] = std::min(approx.s_hi(), track.total_length());
  for (int k = 0; k < n; ++k) {
    const int ui = ocp_input_index(n, k);
    lower[ui + 0] = params.accel_min;
    upper[ui + 0] = params.accel_max;
    lower[ui + 1] = -params.steer_max;
    upper[ui + 1] = params.steer_max;
  }
  lower[ocp_lambda_index(n)] = 0.0;
  upper[ocp_lambda_index(n)] = 1.0;
  ocp.nlp.lower = std::move(lower);
  ocp.nlp.upper = std::move(upper);

  ocp.nlp.objective = [data](const Eigen::VectorXd& z) {
    const int h = data->config.horizon;
    const double s = z[ocp_state_index(h, h) + 5];
    const double lambda = z[ocp_lambda_index(h)];
    double rate = 0.0;
    for (int k = 0; k + 1 < h; ++k) {
      const int a = ocp_input_index(h, k);
      const int b = ocp_input_index(h, k + 1);
      rate += (z[b] - z[a]) * (z[b] - z[a]) +
              (z[b + 1] - z[a + 1]) * (z[b + 1] - z[a + 1]);
    }
    return blended_cost(*data, s, lambda) + data->config.rate_eps * rate;
  };
  ocp.nlp.gradient = [data](const Eigen::VectorXd& z) {
    return ocp_objective_gradient(*data, z);
  };
  ocp.nlp.hessian = [data](const Eigen::VectorXd& z) {
    return ocp_hessian(*data, z);
  };
  ocp.nlp.equality = [data](const Eigen::VectorXd& z) {
    return ocp_equality(*data, z);
  };
  ocp.nlp.equality_jacobian = [data](const Eigen::VectorXd& z) {
    return ocp_equality_jacobian(*data, z);
  };
  return ocp;
}

OcpSolution rollout_guess(const VehicleState& x_t,
                          std::vector<ControlInput> inputs, double lambda,
                          const ThetaParams& theta, const LmpcConfig& config,
                          const Track& track) {
  OcpSolution guess;
  guess.inputs = std::move(inputs);
  guess.lambda = std::clamp(lambda, 0.0, 1.0);
  guess.states.resize(guess.inputs.size() + 1);
  guess.states[0] = x_t;
  for (std::size_t k = 0; k < guess.inputs.size(); ++k) {
    // A guess that runs off the track is still a usable seed; freeze it
    // at the last valid state and let the solver repair the rest.
    try {
      guess.states[k + 1] =
          predict(guess.states[k], guess.inputs[k], theta, config.dt, track);
    } catch (const std::exception&) {
      guess.states[k + 1] = guess.states[k];
    }
  }
  return guess;
}

OcpSolution solve_ocp(const Ocp& ocp, const OcpSolution* warm_start) {
  const OcpData& d = *ocp.data;
  const int n = ocp.horizon;

  OcpSolution seed;
  if (warm_start != nullptr &&
      warm_start->inputs.size() == static_cast<std::size_t>(n)) {
    std::vector<ControlInput> inputs = warm_start->inputs;
    for (ControlInput& u : inputs) {
      u.accel = std::clamp(u.accel, d.params.accel_min, d.params.accel_max);
      u.steer = std::clamp(u.steer, -d.params.steer_max, d.params.steer_max);
    }
    seed = rollout_guess(d.x0, std::move(inputs), warm_start->lambda, d.theta,
                         d.config, *d.track);
  } else {
    seed = rollout_guess(d.x0, std::vector<ControlInput>(n, ControlInput{}),
                         1.0, d.theta, d.config, *d.track);
  }

  SqpOptions options;
  options.tol_feasibility = d.config.tol_feasibility;
  options.tol_stationarity = d.config.tol_stationarity;
  options.max_iterations = d.config.max_sqp_iterations;

  const SqpResult res = solve_sqp(ocp.nlp, seed.pack(n), options);

  OcpSolution sol = OcpSolution::unpack(res.z, n);
  sol.status = res.status;
  sol.objective = res.objective;
  sol.max_violation = res.max_violation;
  sol.sqp_iterations = res.iterations;
  sol.merit_history = res.merit_history;
  return sol;
}

ControlDecision control_step(const VehicleState& x_t, const ThetaParams& theta,
                             const LocalApproximation& approx,
                             const LmpcConfig& config,
                             const VehicleParams& params, const Track& track,
                             const OcpSolution* previous,
                             const OcpSolution* initial_guess) {
  const Ocp ocp = build_ocp(x_t, theta, approx, config, params, track);

  auto shift = [&](const OcpSolution& base) {
    std::vector<ControlInput> inputs(base.inputs.begin() + 1,
                                     base.inputs.end());
    inputs.push_back(base.inputs.back());
    return rollout_guess(x_t, std::move(inputs), base.lambda, theta, config,
                         track);
  };

  OcpSolution warm;
  if (previous != nullptr && !previous->inputs.empty()) {
    warm = shift(*previous);
  } else if (initial_guess != nullptr && !initial_guess->inputs.empty()) {
    warm = rollout_guess(x_t, initial_guess->inputs, initial_guess->lambda,
                         theta, config, track);
  } else {
    warm = rollout_guess(
        x_t, std::vector<ControlInput>(config.horizon, ControlInput{}), 1.0,
        theta, config, track);
  }

  ControlDecision decision;
  decision.solution = solve_ocp(ocp, &warm);

  const bool usable =
      decision.solution.status == SolveStatus::kOptimal ||
      (decision.solution.status == SolveStatus::kMaxIter &&
       decision.solution.max_violation <= config.tol_feasibility);
  if (usable) {
    decision.input = decision.solution.inputs.front();
    decision.fallback = false;
    return decision;
  }

  if (previous == nullptr || previous->inputs.empty()) {
    throw std::runtime_error(
        "optimization failed with no previous solution to fall back on");
  }
  OcpSolution shifted = shift(*previous);
  shifted.status = decision.solution.status;
  shifted.max_violation = decision.solution.max_violation;
  shifted.sqp_iterations = decision.solution.sqp_iterations;
  decision.solution = std::move(shifted);
  decision.input = decision.solution.inputs.front();
  decision.fallback = true;
  return decision;
}

}  // namespace racelmpc
