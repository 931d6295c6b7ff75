#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace racelmpc {

/// Smooth program with equality constraints and variable bounds:
///   min f(z)  s.t.  c(z) = 0,  lower <= z <= upper.
struct Nlp {
  int num_vars = 0;
  int num_eq = 0;
  Eigen::VectorXd lower;  // -inf entries allowed
  Eigen::VectorXd upper;

  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  /// Positive-semidefinite model of the objective curvature.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> equality;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> equality_jacobian;
};

enum class SolveStatus { kOptimal, kMaxIter, kInfeasible };

struct SqpOptions {
  double tol_feasibility = 1e-4;   // max constraint violation at exit
  double tol_stationarity = 1e-3;  // scaled KKT stationarity at exit
  int max_iterations = 40;
  double damping_init = 1e-3;  // Levenberg term added to the Hessian model
  double damping_min = 1e-8;
  double damping_max = 1e6;
};

/// l1 merit value before and after one accepted step (same penalty).
struct MeritStep {
  double before = 0.0;
  double after = 0.0;
};

struct SqpResult {
  Eigen::VectorXd z;
  SolveStatus status = SolveStatus::kMaxIter;
  double objective = 0.0;
  double max_violation = 0.0;  // equalities and bounds
  int iterations = 0;
  std::vector<MeritStep> merit_history;
  Eigen::VectorXd eq_multipliers;
};

/// Sequential quadratic programming with an l1-penalty line search.
/// Deterministic for identical inputs.
SqpResult solve_sqp(const Nlp& nlp, const Eigen::VectorXd& z0,
                    const SqpOptions& options);

/// Convex QP with row constraints:
///   min 1/2 x'Px + q'x  s.t.  lo <= Ax <= up
/// (equalities encoded as lo == up). Solved with over-relaxed ADMM plus
/// an active-set polish step.
struct BoxQp {
  Eigen::MatrixXd hessian;       // P, positive semidefinite
  Eigen::VectorXd linear;        // q
  Eigen::MatrixXd constraints;   // A
  Eigen::VectorXd lo;
  Eigen::VectorXd up;
};

struct QpResult {
  bool solved = false;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per row of A
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

QpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd* x_warm = nullptr,
                      const Eigen::VectorXd* y_warm = nullptr,
                      double tolerance = 1e-9, int max_iterations = 4000);

}  // namespace racelmpc
