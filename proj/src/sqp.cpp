#include "racelmpc/nlp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace racelmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

struct AdmmWorkspace {
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt;
  Eigen::VectorXd rho;  // per-row penalty
  double rho_base = 0.1;

  void factor(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
              double sigma) {
    const Eigen::Index n = p.rows();
    const Eigen::Index m = a.rows();
    Eigen::MatrixXd kkt_matrix(n + m, n + m);
    kkt_matrix.topLeftCorner(n, n) =
        p + sigma * Eigen::MatrixXd::Identity(n, n);
    kkt_matrix.topRightCorner(n, m) = a.transpose();
    kkt_matrix.bottomLeftCorner(m, n) = a;
    kkt_matrix.bottomRightCorner(m, m) =
        (-rho.cwiseInverse()).asDiagonal().toDenseMatrix();
    kkt.compute(kkt_matrix);
  }
};

// Active-set refinement of an ADMM iterate: solve the equality KKT of
// the rows the duals mark active and keep the result if it tightens the
// residuals.
bool polish(const BoxQp& qp, Eigen::VectorXd& x, Eigen::VectorXd& y,
            Eigen::VectorXd& z, double& r_prim, double& r_dual) {
  const Eigen::Index n = qp.hessian.rows();
  const Eigen::Index m = qp.constraints.rows();

  std::vector<Eigen::Index> active;
  std::vector<double> target;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.lo[i] == qp.up[i]) {
      active.push_back(i);
      target.push_back(qp.lo[i]);
    } else if (y[i] < -1e-12) {
      active.push_back(i);
      target.push_back(qp.lo[i]);
    } else if (y[i] > 1e-12) {
      active.push_back(i);
      target.push_back(qp.up[i]);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!std::isfinite(target[j])) {
      return false;  // a dual latched onto an unbounded side
    }
  }

  Eigen::MatrixXd a_act(k, n);
  Eigen::VectorXd b_act(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    a_act.row(j) = qp.constraints.row(active[j]);
    b_act[j] = target[j];
  }

  constexpr double kReg = 1e-9;
  Eigen::MatrixXd kkt(n + k, n + k);
  kkt.topLeftCorner(n, n) =
      qp.hessian + kReg * Eigen::MatrixXd::Identity(n, n);
  kkt.topRightCorner(n, k) = a_act.transpose();
  kkt.bottomLeftCorner(k, n) = a_act;
  kkt.bottomRightCorner(k, k) = -kReg * Eigen::MatrixXd::Identity(k, k);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);

  Eigen::VectorXd rhs(n + k);
  rhs.head(n) = -qp.linear;
  rhs.tail(k) = b_act;
  Eigen::VectorXd sol = lu.solve(rhs);
  // One step of iterative refinement against the unregularized system.
  Eigen::VectorXd residual(n + k);
  residual.head(n) = -qp.linear - qp.hessian * sol.head(n) -
                     a_act.transpose() * sol.tail(k);
  residual.tail(k) = b_act - a_act * sol.head(n);
  sol += lu.solve(residual);

  Eigen::VectorXd x_new = sol.head(n);
  Eigen::VectorXd y_new = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < k; ++j) {
    y_new[active[j]] = sol[n + j];
  }

  Eigen::VectorXd ax = qp.constraints * x_new;
  Eigen::VectorXd z_new = ax.cwiseMax(qp.lo).cwiseMin(qp.up);
  const double r_prim_new = inf_norm(ax - z_new);
  const double r_dual_new =
      inf_norm(qp.hessian * x_new + qp.linear +
               qp.constraints.transpose() * y_new);
  if (!x_new.allFinite() || !y_new.allFinite()) {
    return false;
  }
  if (std::max(r_prim_new, r_dual_new) <= std::max(r_prim, r_dual)) {
    x = x_new;
    y = y_new;
    z = z_new;
    r_prim = r_prim_new;
    r_dual = r_dual_new;
    return true;
  }
  return false;
}

}  // namespace

QpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd* x_warm,
                      const Eigen::VectorXd* y_warm, double tolerance,
                      int max_iterations) {
  const Eigen::Index n = qp.hessian.rows();
  const Eigen::Index m = qp.constraints.rows();
  constexpr double kSigma = 1e-6;
  constexpr double kRelax = 1.6;
  constexpr double kEqRhoScale = 1e3;

  QpResult result;
  if ((qp.lo.array() > qp.up.array()).any()) {
    return result;  // empty feasible set
  }

  AdmmWorkspace ws;
  ws.rho.resize(m);
  auto set_rho = [&](double base) {
    ws.rho_base = base;
    for (Eigen::Index i = 0; i < m; ++i) {
      ws.rho[i] = qp.lo[i] == qp.up[i] ? kEqRhoScale * base : base;
    }
  };
  set_rho(0.1);
  ws.factor(qp.hessian, qp.constraints, kSigma);

  Eigen::VectorXd x = x_warm ? *x_warm : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = y_warm && y_warm->size() == m
                          ? *y_warm
                          : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = (qp.constraints * x).cwiseMax(qp.lo).cwiseMin(qp.up);

  Eigen::VectorXd rhs(n + m);
  double r_prim = kInf;
  double r_dual = kInf;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    rhs.head(n) = kSigma * x - qp.linear;
    rhs.tail(m) = z - y.cwiseQuotient(ws.rho);
    const Eigen::VectorXd sol = ws.kkt.solve(rhs);
    const auto x_tilde = sol.head(n);
    const Eigen::VectorXd z_tilde =
        z + (sol.tail(m) - y).cwiseQuotient(ws.rho);

    x = kRelax * x_tilde + (1.0 - kRelax) * x;
    const Eigen::VectorXd z_relaxed = kRelax * z_tilde + (1.0 - kRelax) * z;
    const Eigen::VectorXd z_prev = z;
    z = (z_relaxed + y.cwiseQuotient(ws.rho)).cwiseMax(qp.lo).cwiseMin(qp.up);
    y += ws.rho.cwiseProduct(z_relaxed - z);

    if (iter % 10 == 0 || iter == max_iterations - 1) {
      const Eigen::VectorXd ax = qp.constraints * x;
      r_prim = inf_norm(ax - z);
      r_dual = inf_norm(qp.hessian * x + qp.linear +
                        qp.constraints.transpose() * y);
      const double prim_scale =
          std::max({inf_norm(ax), inf_norm(z), 1.0});
      const double dual_scale =
          std::max({inf_norm(qp.hessian * x), inf_norm(qp.linear),
                    inf_norm(qp.constraints.transpose() * y), 1.0});
      if (r_prim <= tolerance * prim_scale &&
          r_dual <= tolerance * dual_scale) {
        break;
      }
      // Rebalance the penalty when the residuals drift apart.
      if (iter > 0 && iter % 100 == 0) {
        const double ratio = (r_prim / prim_scale) /
                             std::max(r_dual / dual_scale, 1e-16);
        if (ratio > 25.0 || ratio < 0.04) {
          const double base = std::clamp(
              ws.rho_base * std::sqrt(ratio), 1e-6, 1e6);
          set_rho(base);
          ws.factor(qp.hessian, qp.constraints, kSigma);
        }
      }
    }
    (void)z_prev;
  }

  {
    const Eigen::VectorXd ax = qp.constraints * x;
    r_prim = inf_norm(ax - z);
    r_dual = inf_norm(qp.hessian * x + qp.linear +
                      qp.constraints.transpose() * y);
  }
  polish(qp, x, y, z, r_prim, r_dual);

  result.x = x;
  result.multipliers = y;
  result.primal_residual = r_prim;
  result.dual_residual = r_dual;
  result.iterations = iter;
  const double prim_scale =
      std::max({inf_norm(qp.constraints * x), inf_norm(z), 1.0});
  result.solved = x.allFinite() && y.allFinite() &&
                  r_prim <= 100.0 * tolerance * prim_scale;
  return result;
}

namespace {

struct Evaluation {
  double objective = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd constraint;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd hessian;
  bool finite = false;
};

Evaluation evaluate(const Nlp& nlp, const Eigen::VectorXd& z,
                    bool with_derivatives) {
  Evaluation e;
  e.objective = nlp.objective(z);
  e.constraint = nlp.num_eq > 0 ? nlp.equality(z)
                                : Eigen::VectorXd::Zero(0);
  bool finite = std::isfinite(e.objective) && e.constraint.allFinite();
  if (with_derivatives && finite) {
    e.gradient = nlp.gradient(z);
    e.jacobian = nlp.num_eq > 0
                     ? nlp.equality_jacobian(z)
                     : Eigen::MatrixXd::Zero(0, nlp.num_vars);
    e.hessian = nlp.hessian(z);
    finite = e.gradient.allFinite() && e.jacobian.allFinite() &&
             e.hessian.allFinite();
  }
  e.finite = finite;
  return e;
}

double l1_merit(const Evaluation& e, double penalty) {
  return e.objective + penalty * e.constraint.template lpNorm<1>();
}

}  // namespace

SqpResult solve_sqp(const Nlp& nlp, const Eigen::VectorXd& z0,
                    const SqpOptions& options) {
  const Eigen::Index n = nlp.num_vars;
  const Eigen::Index m = nlp.num_eq;

  SqpResult result;
  result.eq_multipliers = Eigen::VectorXd::Zero(m);
  if ((nlp.lower.array() > nlp.upper.array()).any()) {
    result.status = SolveStatus::kInfeasible;
    result.z = z0;
    result.max_violation = kInf;
    return result;
  }

  Eigen::VectorXd z = z0.cwiseMax(nlp.lower).cwiseMin(nlp.upper);
  double penalty = 1.0;
  double damping = options.damping_init;
  Eigen::VectorXd qp_x_warm;
  Eigen::VectorXd qp_y_warm;
  int stall_count = 0;
  double best_violation = kInf;

  Evaluation eval = evaluate(nlp, z, true);
  if (!eval.finite) {
    result.status = SolveStatus::kInfeasible;
    result.z = z;
    result.max_violation = kInf;
    return result;
  }

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double violation = inf_norm(eval.constraint);

    // QP in the step d: rows are the linearized equalities followed by
    // the variable bounds.
    BoxQp qp;
    qp.hessian = eval.hessian +
                 damping * Eigen::MatrixXd::Identity(n, n);
    qp.linear = eval.gradient;
    qp.constraints.resize(m + n, n);
    qp.constraints.topRows(m) = eval.jacobian;
    qp.constraints.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
    qp.lo.resize(m + n);
    qp.up.resize(m + n);
    qp.lo.head(m) = -eval.constraint;
    qp.up.head(m) = -eval.constraint;
    qp.lo.tail(n) = nlp.lower - z;
    qp.up.tail(n) = nlp.upper - z;

    QpResult qp_result = solve_box_qp(
        qp, qp_x_warm.size() == n ? &qp_x_warm : nullptr,
        qp_y_warm.size() == m + n ? &qp_y_warm : nullptr, 1e-9, 4000);

    if (!qp_result.solved) {
      // The linearization may be inconsistent with the bounds; take a
      // pure feasibility-restoration step instead.
      BoxQp restoration;
      restoration.hessian =
          eval.jacobian.transpose() * eval.jacobian +
          1e-6 * Eigen::MatrixXd::Identity(n, n);
      restoration.linear = eval.jacobian.transpose() * eval.constraint;
      restoration.constraints = Eigen::MatrixXd::Identity(n, n);
      restoration.lo = nlp.lower - z;
      restoration.up = nlp.upper - z;
      QpResult rest = solve_box_qp(restoration, nullptr, nullptr, 1e-9, 4000);
      bool improved = false;
      if (rest.solved) {
        Eigen::VectorXd z_try = (z + rest.x)
                                    .cwiseMax(nlp.lower)
                                    .cwiseMin(nlp.upper);
        Evaluation trial = evaluate(nlp, z_try, true);
        if (trial.finite &&
            inf_norm(trial.constraint) < 0.9 * violation) {
          z = z_try;
          eval = std::move(trial);
          improved = true;
        }
      }
      if (!improved) {
        ++stall_count;
        damping = std::min(damping * 10.0, options.damping_max);
        if (stall_count >= 3) {
          result.status = violation > options.tol_feasibility
                              ? SolveStatus::kInfeasible
                              : SolveStatus::kMaxIter;
          break;
        }
      }
      continue;
    }

    const Eigen::VectorXd d = qp_result.x;
    const Eigen::VectorXd nu = qp_result.multipliers.head(m);
    const Eigen::VectorXd bound_duals = qp_result.multipliers.tail(n);
    qp_x_warm = d;
    qp_y_warm = qp_result.multipliers;

    // KKT stationarity of the original problem with the QP multipliers.
    const double stationarity =
        inf_norm(eval.gradient + eval.jacobian.transpose() * nu +
                 bound_duals);
    const double grad_scale = 1.0 + inf_norm(eval.gradient);
    const double step_norm = inf_norm(d);
    if (violation <= options.tol_feasibility &&
        (stationarity <= options.tol_stationarity * grad_scale ||
         step_norm <= 1e-12 * (1.0 + inf_norm(z)))) {
      result.status = SolveStatus::kOptimal;
      result.eq_multipliers = nu;
      break;
    }

    // l1 penalty keeps the multipliers dominated.
    penalty = std::max(penalty, 1.5 * inf_norm(nu) + 1e-3);
    const double constraint_l1 = eval.constraint.template lpNorm<1>();
    double descent = eval.gradient.dot(d) - penalty * constraint_l1;
    if (descent >= 0.0) {
      if (constraint_l1 > 1e-14) {
        penalty *= 10.0;
        descent = eval.gradient.dot(d) - penalty * constraint_l1;
      }
      if (descent >= 0.0) {
        // No usable descent direction: either done or stuck.
        if (violation <= options.tol_feasibility) {
          result.status = SolveStatus::kOptimal;
          result.eq_multipliers = nu;
          break;
        }
        damping = std::min(damping * 10.0, options.damping_max);
        ++stall_count;
        if (stall_count >= 5) {
          result.status = SolveStatus::kInfeasible;
          break;
        }
        continue;
      }
    }

    const double merit_here = l1_merit(eval, penalty);
    double alpha = 1.0;
    bool accepted = false;
    Evaluation next;
    for (int backtrack = 0; backtrack < 30; ++backtrack) {
      Eigen::VectorXd z_try =
          (z + alpha * d).cwiseMax(nlp.lower).cwiseMin(nlp.upper);
      next = evaluate(nlp, z_try, false);
      if (next.finite &&
          l1_merit(next, penalty) <=
              merit_here + 1e-4 * alpha * descent) {
        z = z_try;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      damping = std::min(damping * 10.0, options.damping_max);
      ++stall_count;
      if (stall_count >= 5) {
        result.status = violation > options.tol_feasibility
                            ? SolveStatus::kInfeasible
                            : SolveStatus::kMaxIter;
        break;
      }
      continue;
    }

    stall_count = 0;
    result.merit_history.push_back({merit_here, l1_merit(next, penalty)});
    if (alpha == 1.0) {
      damping = std::max(damping * 0.3, options.damping_min);
    } else if (alpha < 0.25) {
      damping = std::min(damping * 3.0, options.damping_max);
    }
    result.eq_multipliers = nu;

    eval = evaluate(nlp, z, true);
    if (!eval.finite) {
      result.status = SolveStatus::kInfeasible;
      break;
    }
    const double new_violation = inf_norm(eval.constraint);
    if (new_violation < best_violation) {
      best_violation = new_violation;
    }
  }

  result.z = z;
  result.iterations = iter;
  Evaluation final_eval = evaluate(nlp, z, false);
  result.objective = final_eval.objective;
  const double bound_violation =
      std::max(inf_norm((nlp.lower - z).cwiseMax(0.0)),
               inf_norm((z - nlp.upper).cwiseMax(0.0)));
  result.max_violation =
      std::max(inf_norm(final_eval.constraint), bound_violation);
  if (result.status == SolveStatus::kOptimal &&
      result.max_violation > options.tol_feasibility) {
    result.status = SolveStatus::kMaxIter;
  }
  return result;
}

}  // namespace racelmpc
