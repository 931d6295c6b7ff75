#include "racelmpc/nlp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

using racelmpc::BoxQp;
using racelmpc::Nlp;
using racelmpc::QpResult;
using racelmpc::SolveStatus;
using racelmpc::SqpOptions;
using racelmpc::SqpResult;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact small-QP oracle: enumerate every activity pattern of the bound
// rows, solve the resulting equality-constrained system, and keep the
// best feasible candidate. Only workable for a handful of rows.
Eigen::VectorXd enumerate_qp(const BoxQp& qp) {
  const Eigen::Index n = qp.hessian.rows();
  const Eigen::Index m = qp.constraints.rows();
  std::vector<Eigen::Index> free_rows;
  std::vector<Eigen::Index> eq_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (qp.lo[i] == qp.up[i]) {
      eq_rows.push_back(i);
    } else {
      free_rows.push_back(i);
    }
  }
  int total = 1;
  for (std::size_t k = 0; k < free_rows.size(); ++k) {
    total *= 3;
  }

  double best_obj = kInf;
  Eigen::VectorXd best;
  for (int code = 0; code < total; ++code) {
    std::vector<Eigen::Index> active;
    std::vector<double> target;
    for (Eigen::Index i : eq_rows) {
      active.push_back(i);
      target.push_back(qp.lo[i]);
    }
    int rem = code;
    bool skip = false;
    for (std::size_t k = 0; k < free_rows.size(); ++k) {
      const int state = rem % 3;
      rem /= 3;
      if (state == 1) {
        if (!std::isfinite(qp.lo[free_rows[k]])) {
          skip = true;
        }
        active.push_back(free_rows[k]);
        target.push_back(qp.lo[free_rows[k]]);
      } else if (state == 2) {
        if (!std::isfinite(qp.up[free_rows[k]])) {
          skip = true;
        }
        active.push_back(free_rows[k]);
        target.push_back(qp.up[free_rows[k]]);
      }
    }
    if (skip) {
      continue;
    }
    const Eigen::Index a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + a, n + a);
    kkt.topLeftCorner(n, n) = qp.hessian;
    Eigen::MatrixXd a_act(a, n);
    Eigen::VectorXd b_act(a);
    for (Eigen::Index j = 0; j < a; ++j) {
      a_act.row(j) = qp.constraints.row(active[j]);
      b_act[j] = target[j];
    }
    kkt.topRightCorner(n, a) = a_act.transpose();
    kkt.bottomLeftCorner(a, n) = a_act;
    Eigen::VectorXd rhs(n + a);
    rhs.head(n) = -qp.linear;
    rhs.tail(a) = b_act;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) {
      continue;
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd ax = qp.constraints * x;
    bool feasible = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (ax[i] < qp.lo[i] - 1e-8 || ax[i] > qp.up[i] + 1e-8) {
        feasible = false;
        break;
      }
    }
    if (!feasible) {
      continue;
    }
    const double obj = 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

Nlp quadratic_nlp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                  const Eigen::VectorXd& lo, const Eigen::VectorXd& up) {
  Nlp nlp;
  nlp.num_vars = static_cast<int>(q.size());
  nlp.num_eq = 0;
  nlp.lower = lo;
  nlp.upper = up;
  nlp.objective = [p, q](const Eigen::VectorXd& z) {
    return 0.5 * z.dot(p * z) + q.dot(z);
  };
  nlp.gradient = [p, q](const Eigen::VectorXd& z) {
    return Eigen::VectorXd(p * z + q);
  };
  nlp.hessian = [p](const Eigen::VectorXd&) { return p; };
  return nlp;
}

}  // namespace

TEST_CASE("box QP clips the unconstrained minimizer") {
  BoxQp qp;
  qp.hessian = Eigen::MatrixXd::Identity(1, 1);
  qp.linear = Eigen::VectorXd::Constant(1, -1.0);  // minimizer at 1
  qp.constraints = Eigen::MatrixXd::Identity(1, 1);
  qp.lo = Eigen::VectorXd::Constant(1, 0.0);
  qp.up = Eigen::VectorXd::Constant(1, 0.4);
  const QpResult result = racelmpc::solve_box_qp(qp);
  REQUIRE(result.solved);
  CHECK(result.x[0] == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(result.multipliers[0] > 0.0);  // pushing against the upper bound
}

TEST_CASE("box QP honors equality rows") {
  // min 1/2(x0^2 + x1^2) s.t. x0 + x1 = 1 -> x = (0.5, 0.5).
  BoxQp qp;
  qp.hessian = Eigen::MatrixXd::Identity(2, 2);
  qp.linear = Eigen::VectorXd::Zero(2);
  qp.constraints = Eigen::MatrixXd::Ones(1, 2);
  qp.lo = Eigen::VectorXd::Constant(1, 1.0);
  qp.up = Eigen::VectorXd::Constant(1, 1.0);
  const QpResult result = racelmpc::solve_box_qp(qp);
  REQUIRE(result.solved);
  CHECK(result.x[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(result.x[1] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("box QP matches an exhaustive active-set oracle") {
  std::mt19937 rng(57);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3;
    Eigen::MatrixXd root(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        root(i, j) = gauss(rng);
      }
    }
    BoxQp qp;
    qp.hessian =
        root.transpose() * root + 0.1 * Eigen::MatrixXd::Identity(n, n);
    qp.linear = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
    // One equality row plus variable boxes.
    qp.constraints.resize(1 + n, n);
    qp.constraints(0, 0) = u(rng);
    qp.constraints(0, 1) = u(rng);
    qp.constraints(0, 2) = u(rng);
    qp.constraints.bottomRows(n) = Eigen::MatrixXd::Identity(n, n);
    qp.lo.resize(1 + n);
    qp.up.resize(1 + n);
    const double b = 0.3 * u(rng);
    qp.lo[0] = b;
    qp.up[0] = b;
    for (int i = 0; i < n; ++i) {
      qp.lo[1 + i] = -0.5 - 0.5 * std::abs(u(rng));
      qp.up[1 + i] = 0.5 + 0.5 * std::abs(u(rng));
    }
    if (qp.constraints.row(0).cwiseAbs().maxCoeff() < 0.2) {
      continue;  // skip nearly-degenerate equality rows
    }

    const Eigen::VectorXd oracle = enumerate_qp(qp);
    if (oracle.size() == 0) {
      continue;  // no feasible activity pattern
    }
    const QpResult result = racelmpc::solve_box_qp(qp);
    REQUIRE(result.solved);
    CHECK((result.x - oracle).cwiseAbs().maxCoeff() < 1e-6);
    ++checked;
  }
  CHECK(checked > 30);
}

TEST_CASE("SQP solves an unconstrained quadratic to the analytic optimum") {
  Eigen::MatrixXd p(2, 2);
  p << 4.0, 1.0, 1.0, 3.0;
  Eigen::VectorXd q(2);
  q << -1.0, 2.0;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -kInf);
  const Eigen::VectorXd up = Eigen::VectorXd::Constant(2, kInf);
  const Nlp nlp = quadratic_nlp(p, q, lo, up);

  SqpOptions options;
  options.tol_stationarity = 1e-9;
  const SqpResult result =
      racelmpc::solve_sqp(nlp, Eigen::VectorXd::Zero(2), options);
  CHECK(result.status == SolveStatus::kOptimal);
  const Eigen::VectorXd analytic = -p.inverse() * q;
  CHECK((result.z - analytic).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a warm start at the optimum is returned unchanged") {
  Eigen::MatrixXd p(2, 2);
  p << 2.0, 0.0, 0.0, 2.0;
  Eigen::VectorXd q(2);
  q << -2.0, -4.0;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -5.0);
  const Eigen::VectorXd up = Eigen::VectorXd::Constant(2, 5.0);
  const Nlp nlp = quadratic_nlp(p, q, lo, up);

  Eigen::VectorXd star(2);
  star << 1.0, 2.0;
  const SqpResult result = racelmpc::solve_sqp(nlp, star, SqpOptions{});
  CHECK(result.status == SolveStatus::kOptimal);
  CHECK((result.z - star).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(result.iterations <= 1);
}

TEST_CASE("SQP matches grid search on a two-step scalar OCP") {
  // Variables [u0, u1, x1, x2] with dynamics x_{k+1} = x_k + 0.5 u_k
  // from x0 = 0, inputs boxed to [-1, 1]; objective tracks x2 to 1.2
  // with input effort.
  const double x0 = 0.0;
  Nlp nlp;
  nlp.num_vars = 4;
  nlp.num_eq = 2;
  nlp.lower = Eigen::VectorXd::Constant(4, -kInf);
  nlp.upper = Eigen::VectorXd::Constant(4, kInf);
  nlp.lower[0] = nlp.lower[1] = -1.0;
  nlp.upper[0] = nlp.upper[1] = 1.0;
  auto objective = [](double u0, double u1, double x2) {
    return (x2 - 1.2) * (x2 - 1.2) + 0.3 * (u0 * u0 + u1 * u1);
  };
  nlp.objective = [objective](const Eigen::VectorXd& z) {
    return objective(z[0], z[1], z[3]);
  };
  nlp.gradient = [](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(4);
    g << 0.6 * z[0], 0.6 * z[1], 0.0, 2.0 * (z[3] - 1.2);
    return g;
  };
  nlp.hessian = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h(0, 0) = 0.6;
    h(1, 1) = 0.6;
    h(3, 3) = 2.0;
    return h;
  };
  nlp.equality = [x0](const Eigen::VectorXd& z) {
    Eigen::VectorXd c(2);
    c[0] = z[2] - x0 - 0.5 * z[0];
    c[1] = z[3] - z[2] - 0.5 * z[1];
    return c;
  };
  nlp.equality_jacobian = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 4);
    j(0, 0) = -0.5;
    j(0, 2) = 1.0;
    j(1, 1) = -0.5;
    j(1, 2) = -1.0;
    j(1, 3) = 1.0;
    return j;
  };

  const SqpResult result =
      racelmpc::solve_sqp(nlp, Eigen::VectorXd::Zero(4), SqpOptions{});
  REQUIRE(result.status == SolveStatus::kOptimal);

  double best = kInf;
  for (int i = 0; i <= 400; ++i) {
    for (int j = 0; j <= 400; ++j) {
      const double u0 = -1.0 + 2.0 * i / 400.0;
      const double u1 = -1.0 + 2.0 * j / 400.0;
      const double x2 = x0 + 0.5 * u0 + 0.5 * u1;
      best = std::min(best, objective(u0, u1, x2));
    }
  }
  CHECK(std::abs(result.objective - best) < 1e-3);
}

TEST_CASE("the merit function never increases across accepted steps") {
  // Nonlinear equality: z1 = z0^2, minimize distance to (2, 1).
  Nlp nlp;
  nlp.num_vars = 2;
  nlp.num_eq = 1;
  nlp.lower = Eigen::VectorXd::Constant(2, -10.0);
  nlp.upper = Eigen::VectorXd::Constant(2, 10.0);
  nlp.objective = [](const Eigen::VectorXd& z) {
    return (z[0] - 2.0) * (z[0] - 2.0) + (z[1] - 1.0) * (z[1] - 1.0);
  };
  nlp.gradient = [](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(2);
    g << 2.0 * (z[0] - 2.0), 2.0 * (z[1] - 1.0);
    return g;
  };
  nlp.hessian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(2, 2));
  };
  nlp.equality = [](const Eigen::VectorXd& z) {
    return Eigen::VectorXd::Constant(1, z[1] - z[0] * z[0]);
  };
  nlp.equality_jacobian = [](const Eigen::VectorXd& z) {
    Eigen::MatrixXd j(1, 2);
    j << -2.0 * z[0], 1.0;
    return j;
  };

  Eigen::VectorXd z0(2);
  z0 << -1.5, 4.0;
  const SqpResult result = racelmpc::solve_sqp(nlp, z0, SqpOptions{});
  CHECK(result.status == SolveStatus::kOptimal);
  CHECK(result.max_violation <= 1e-4);
  REQUIRE(!result.merit_history.empty());
  for (const racelmpc::MeritStep& step : result.merit_history) {
    CHECK(step.after <= step.before + 1e-12);
  }
}

TEST_CASE("inconsistent bounds and equalities are reported infeasible") {
  Nlp crossed;
  crossed.num_vars = 1;
  crossed.num_eq = 0;
  crossed.lower = Eigen::VectorXd::Constant(1, 2.0);
  crossed.upper = Eigen::VectorXd::Constant(1, 1.0);
  crossed.objective = [](const Eigen::VectorXd& z) { return z[0]; };
  crossed.gradient = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(1);
  };
  crossed.hessian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  const SqpResult r1 =
      racelmpc::solve_sqp(crossed, Eigen::VectorXd::Zero(1), SqpOptions{});
  CHECK(r1.status == SolveStatus::kInfeasible);

  // Equalities that contradict each other: z0 = 1 and z0 = 2.
  Nlp contradictory;
  contradictory.num_vars = 1;
  contradictory.num_eq = 2;
  contradictory.lower = Eigen::VectorXd::Constant(1, -10.0);
  contradictory.upper = Eigen::VectorXd::Constant(1, 10.0);
  contradictory.objective = [](const Eigen::VectorXd&) { return 0.0; };
  contradictory.gradient = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(1);
  };
  contradictory.hessian = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  contradictory.equality = [](const Eigen::VectorXd& z) {
    Eigen::VectorXd c(2);
    c << z[0] - 1.0, z[0] - 2.0;
    return c;
  };
  contradictory.equality_jacobian = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd j(2, 1);
    j << 1.0, 1.0;
    return j;
  };
  const SqpResult r2 = racelmpc::solve_sqp(
      contradictory, Eigen::VectorXd::Zero(1), SqpOptions{});
  CHECK(r2.status != SolveStatus::kOptimal);
  CHECK(r2.max_violation > 1e-4);
}

TEST_CASE("SQP is deterministic") {
  Eigen::MatrixXd p(3, 3);
  p << 3.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.5;
  Eigen::VectorXd q(3);
  q << 1.0, -2.0, 0.5;
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(3, -0.8);
  const Eigen::VectorXd up = Eigen::VectorXd::Constant(3, 0.8);
  const Nlp nlp = quadratic_nlp(p, q, lo, up);
  const SqpResult a =
      racelmpc::solve_sqp(nlp, Eigen::VectorXd::Zero(3), SqpOptions{});
  const SqpResult b =
      racelmpc::solve_sqp(nlp, Eigen::VectorXd::Zero(3), SqpOptions{});
  CHECK(a.z == b.z);
  CHECK(a.objective == b.objective);
}
