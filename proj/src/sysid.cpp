#include "racelmpc/sysid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace racelmpc {

std::size_t nearest_index(const VehicleState& x,
                          std::span<const VehicleState> trajectory,
                          const Vector6d& weights) {
  if (trajectory.empty()) {
    throw std::invalid_argument("nearest_index on an empty trajectory");
  }
  const Vector6d query = x.vec();
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const double dist =
        (weights.asDiagonal() * (trajectory[t].vec() - query)).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = t;
    }
  }
  return best;
}

namespace {

struct TransitionRows {
  std::vector<FeatureVectors> features;
  std::vector<Eigen::Vector3d> residuals;  // velocity-state residuals
};

// One row per transition i -> i+1 with source index in [begin, end].
void append_transitions(TransitionRows& rows,
                        std::span<const VehicleState> states,
                        std::span<const ControlInput> inputs,
                        std::ptrdiff_t begin, std::ptrdiff_t end, double dt,
                        const Track& track) {
  if (states.size() < 2) {
    return;
  }
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(states.size()) - 2;
  begin = std::max<std::ptrdiff_t>(begin, 0);
  end = std::min(end, last);
  for (std::ptrdiff_t i = begin; i <= end; ++i) {
    const VehicleState& from = states[i];
    const VehicleState& to = states[i + 1];
    const VehicleState base = g_bar(from, inputs[i], dt, track);
    rows.features.push_back(features(from, inputs[i]));
    rows.residuals.emplace_back(to.v_x - base.v_x, to.v_y - base.v_y,
                                to.yaw_rate - base.yaw_rate);
  }
}

}  // namespace

RegressionProblem build_regression(const VehicleState& x_t,
                                   std::span<const VehicleState> current_states,
                                   std::span<const ControlInput> current_inputs,
                                   const SafeSet& safeset,
                                   const SysIdConfig& config, double dt,
                                   const Track& track) {
  if (safeset.empty()) {
    throw std::invalid_argument("system identification needs a stored lap");
  }

  TransitionRows rows;

  // Running lap: its newest transitions.
  if (current_states.size() >= 2) {
    const std::ptrdiff_t last =
        static_cast<std::ptrdiff_t>(current_states.size()) - 2;
    append_transitions(rows, current_states, current_inputs,
                       last - config.history, last, dt, track);
  }

  // Stored laps: windows around the state nearest to x_t.
  const std::size_t laps =
      std::min<std::size_t>(config.past_iterations, safeset.size());
  for (std::size_t k = 0; k < laps; ++k) {
    const StoredIteration& iter = safeset.latest(k);
    const std::ptrdiff_t nearest = static_cast<std::ptrdiff_t>(
        nearest_index(x_t, iter.states, config.distance_weights));
    append_transitions(rows, iter.states, iter.inputs,
                       nearest - config.history, nearest + config.lookahead,
                       dt, track);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.features.size());
  if (n < 4) {
    throw std::invalid_argument("insufficient data for system identification");
  }

  RegressionProblem problem;
  problem.phi_v_x.resize(n, 3);
  problem.phi_v_y.resize(n, 4);
  problem.phi_yaw.resize(n, 3);
  problem.y_v_x.resize(n);
  problem.y_v_y.resize(n);
  problem.y_yaw.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    problem.phi_v_x.row(i) = rows.features[i].v_x.transpose();
    problem.phi_v_y.row(i) = rows.features[i].v_y.transpose();
    problem.phi_yaw.row(i) = rows.features[i].yaw.transpose();
    problem.y_v_x[i] = rows.residuals[i][0];
    problem.y_v_y[i] = rows.residuals[i][1];
    problem.y_yaw[i] = rows.residuals[i][2];
  }
  return problem;
}

namespace {

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& y, double ridge) {
  if (!phi.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("regression data contains non-finite values");
  }
  const Eigen::Index p = phi.cols();
  if (phi.rows() < p) {
    throw std::invalid_argument("fewer regression rows than coefficients");
  }
  if (ridge <= 0.0) {
    return phi.colPivHouseholderQr().solve(y);
  }
  Eigen::MatrixXd augmented(phi.rows() + p, p);
  augmented.topRows(phi.rows()) = phi;
  augmented.bottomRows(p) =
      std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.rows() + p);
  rhs.head(phi.rows()) = y;
  return augmented.colPivHouseholderQr().solve(rhs);
}

}  // namespace

ThetaParams solve_theta(const RegressionProblem& problem, double ridge) {
  ThetaParams theta;
  theta.v_x = ridge_solve(problem.phi_v_x, problem.y_v_x, ridge);
  theta.v_y = ridge_solve(problem.phi_v_y, problem.y_v_y, ridge);
  theta.yaw = ridge_solve(problem.phi_yaw, problem.y_yaw, ridge);
  return theta;
}

}  // namespace racelmpc
