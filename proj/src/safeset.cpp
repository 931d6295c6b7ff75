#include "racelmpc/safeset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "racelmpc/sysid.hpp"

namespace racelmpc {

void SafeSet::add_iteration(std::vector<VehicleState> states,
                            std::vector<ControlInput> inputs,
                            double s_target) {
  if (states.empty() || inputs.size() + 1 != states.size()) {
    throw std::invalid_argument(
        "iteration needs n states and n-1 inputs, n >= 1");
  }
  std::size_t crossing = states.size();
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (states[t].s > s_target) {
      crossing = t;
      break;
    }
  }
  if (crossing == states.size()) {
    throw std::invalid_argument(
        "unsuccessful iteration: trajectory never crosses the finish line");
  }

  StoredIteration iter;
  iter.states = std::move(states);
  iter.inputs = std::move(inputs);
  iter.crossing_index = crossing;
  iter.cost_to_go.resize(iter.states.size());
  for (std::size_t t = 0; t < iter.states.size(); ++t) {
    iter.cost_to_go[t] =
        t < crossing ? static_cast<int>(crossing - t) : 0;
  }
  iterations_.push_back(std::move(iter));
}

const StoredIteration& SafeSet::latest(std::size_t back) const {
  if (back >= iterations_.size()) {
    throw std::out_of_range("not enough stored iterations");
  }
  return iterations_[iterations_.size() - 1 - back];
}

double q_value(const SafeSet& safeset, const VehicleState& x) {
  constexpr double kMatchTol = 1e-12;
  const Vector6d query = x.vec();
  double best = std::numeric_limits<double>::infinity();
  for (const StoredIteration& iter : safeset.iterations()) {
    for (std::size_t t = 0; t < iter.states.size(); ++t) {
      if ((iter.states[t].vec() - query).cwiseAbs().maxCoeff() <= kMatchTol) {
        best = std::min(best, static_cast<double>(iter.cost_to_go[t]));
      }
    }
  }
  return best;
}

double LocalPolynomial::value(double s) const {
  const double z = 2.0 * (s - s_lo) / (s_hi - s_lo) - 1.0;
  double acc = 0.0;
  for (int k = 5; k >= 0; --k) {
    acc = acc * z + coeffs[k];
  }
  return acc;
}

double LocalPolynomial::deriv(double s) const {
  const double scale = 2.0 / (s_hi - s_lo);
  const double z = 2.0 * (s - s_lo) / (s_hi - s_lo) - 1.0;
  double acc = 0.0;
  for (int k = 5; k >= 1; --k) {
    acc = acc * z + k * coeffs[k];
  }
  return acc * scale;
}

double LocalPolynomial::second_deriv(double s) const {
  const double scale = 2.0 / (s_hi - s_lo);
  const double z = 2.0 * (s - s_lo) / (s_hi - s_lo) - 1.0;
  double acc = 0.0;
  for (int k = 5; k >= 2; --k) {
    acc = acc * z + k * (k - 1) * coeffs[k];
  }
  return acc * scale * scale;
}

LocalPolynomial fit_poly5(std::span<const double> arclengths,
                          std::span<const double> values) {
  const std::size_t n = arclengths.size();
  if (n < 6 || values.size() != n) {
    throw std::invalid_argument("poly5 fit needs >= 6 matching samples");
  }
  LocalPolynomial poly;
  poly.s_lo = arclengths.front();
  poly.s_hi = arclengths.back();
  if (!(poly.s_hi > poly.s_lo)) {
    throw std::invalid_argument("poly5 fit needs increasing arclength");
  }

  Eigen::MatrixXd vandermonde(n, 6);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z =
        2.0 * (arclengths[i] - poly.s_lo) / (poly.s_hi - poly.s_lo) - 1.0;
    double p = 1.0;
    for (int k = 0; k < 6; ++k) {
      vandermonde(i, k) = p;
      p *= z;
    }
    rhs[i] = values[i];
  }
  poly.coeffs = vandermonde.colPivHouseholderQr().solve(rhs);
  return poly;
}

namespace {

struct Window {
  std::size_t begin;
  std::size_t end;  // inclusive
};

Window fit_window(const StoredIteration& iteration, std::size_t l,
                  int horizon) {
  if (horizon < 2) {
    throw std::invalid_argument("horizon must be >= 2");
  }
  if (l >= iteration.states.size()) {
    throw std::invalid_argument("window start beyond trajectory end");
  }
  Window w{l, std::min(l + static_cast<std::size_t>(4 * horizon),
                       iteration.states.size() - 1)};
  if (w.end - w.begin + 1 < 6) {
    throw std::invalid_argument(
        "fewer than 6 points left in the local fit window");
  }
  return w;
}

}  // namespace

std::array<LocalPolynomial, 5> fit_local_state_polynomial(
    const StoredIteration& iteration, std::size_t l, int horizon) {
  const Window w = fit_window(iteration, l, horizon);
  const std::size_t n = w.end - w.begin + 1;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = iteration.states[w.begin + i].s;
  }
  std::array<LocalPolynomial, 5> polys;
  std::vector<double> vals(n);
  for (int comp = 0; comp < 5; ++comp) {
    for (std::size_t i = 0; i < n; ++i) {
      vals[i] = iteration.states[w.begin + i].vec()[comp];
    }
    polys[comp] = fit_poly5(s, vals);
  }
  return polys;
}

LocalPolynomial fit_local_cost_polynomial(const StoredIteration& iteration,
                                          std::size_t l, int horizon) {
  const Window w = fit_window(iteration, l, horizon);
  const std::size_t n = w.end - w.begin + 1;
  std::vector<double> s(n);
  std::vector<double> cost(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = iteration.states[w.begin + i].s;
    cost[i] = static_cast<double>(iteration.cost_to_go[w.begin + i]);
  }
  return fit_poly5(s, cost);
}

double LocalApproximation::s_lo() const {
  return std::max(prev1.cost_poly.s_lo, prev2.cost_poly.s_lo);
}

double LocalApproximation::s_hi() const {
  return std::min(prev1.cost_poly.s_hi, prev2.cost_poly.s_hi);
}

LocalApproximation local_approximation(const SafeSet& safeset,
                                       const VehicleState& x_t, int horizon) {
  if (safeset.empty()) {
    throw std::invalid_argument("safe set is empty");
  }
  LocalApproximation approx;
  const std::size_t count = safeset.size();
  const std::size_t idx1 = count - 1;
  const std::size_t idx2 = count >= 2 ? count - 2 : count - 1;

  auto fit_one = [&](std::size_t idx) {
    const StoredIteration& iter = safeset.iterations()[idx];
    IterationLocalFit fit;
    fit.source_iteration = idx;
    fit.nearest = nearest_index(x_t, iter.states);
    fit.state_polys = fit_local_state_polynomial(iter, fit.nearest, horizon);
    fit.cost_poly = fit_local_cost_polynomial(iter, fit.nearest, horizon);
    return fit;
  };

  approx.prev1 = fit_one(idx1);
  approx.prev2 = idx2 == idx1 ? approx.prev1 : fit_one(idx2);
  return approx;
}

double q_tilde(const LocalApproximation& approx, double s_terminal,
               double lambda) {
  constexpr double kEdgeTol = 1e-9;
  if (s_terminal < approx.s_lo() - kEdgeTol ||
      s_terminal > approx.s_hi() + kEdgeTol) {
    throw std::out_of_range("terminal arclength outside the fit window");
  }
  return lambda * approx.prev1.cost_poly.value(s_terminal) +
         (1.0 - lambda) * approx.prev2.cost_poly.value(s_terminal);
}

}  // namespace racelmpc
