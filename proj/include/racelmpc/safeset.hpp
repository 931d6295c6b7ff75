#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "racelmpc/vehicle.hpp"

namespace racelmpc {

/// One completed lap: realized states/inputs, the step at which the
/// finish line was crossed, and the per-point steps-to-finish cost.
struct StoredIteration {
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;  // states.size() - 1 entries
  std::size_t crossing_index = 0;    // first t with s_t > s_target
  std::vector<int> cost_to_go;       // max(crossing_index - t, 0)
};

/// Collection of successful laps. Append-only between laps, read-only
/// while one is running.
class SafeSet {
 public:
  /// Stores a lap. Throws std::invalid_argument if the trajectory never
  /// crosses s_target (unsuccessful laps are not kept).
  void add_iteration(std::vector<VehicleState> states,
                     std::vector<ControlInput> inputs, double s_target);

  const std::vector<StoredIteration>& iterations() const {
    return iterations_;
  }
  bool empty() const { return iterations_.empty(); }
  std::size_t size() const { return iterations_.size(); }
  const StoredIteration& latest(std::size_t back = 0) const;

 private:
  std::vector<StoredIteration> iterations_;
};

/// Exact minimum steps-to-finish over every stored occurrence of x
/// (componentwise match within 1e-12); +infinity when x was never
/// visited. Test oracle; the controller uses the polynomial relaxation.
double q_value(const SafeSet& safeset, const VehicleState& x);

/// Degree-5 polynomial in s, fitted and evaluated through an affine map
/// of [s_lo, s_hi] onto [-1, 1] for conditioning.
struct LocalPolynomial {
  Eigen::Matrix<double, 6, 1> coeffs =
      Eigen::Matrix<double, 6, 1>::Zero();  // ascending powers of the
                                            // normalized coordinate
  double s_lo = 0.0;
  double s_hi = 1.0;

  double value(double s) const;
  double deriv(double s) const;        // d/ds
  double second_deriv(double s) const; // d^2/ds^2
};

/// Least-squares degree-5 fit of values against arclengths. Needs at
/// least 6 samples.
LocalPolynomial fit_poly5(std::span<const double> arclengths,
                          std::span<const double> values);

/// Per-state polynomial fits over the window [l, l+4N] (clipped to the
/// trajectory end) of one stored lap, in state order
/// v_x, v_y, yaw_rate, e_psi, e_y. Throws std::invalid_argument when
/// fewer than 6 points remain after clipping.
std::array<LocalPolynomial, 5> fit_local_state_polynomial(
    const StoredIteration& iteration, std::size_t l, int horizon);

/// Same window, cost-to-go as the dependent variable.
LocalPolynomial fit_local_cost_polynomial(const StoredIteration& iteration,
                                          std::size_t l, int horizon);

/// Local fits of one stored lap around the current state.
struct IterationLocalFit {
  std::array<LocalPolynomial, 5> state_polys;
  LocalPolynomial cost_poly;
  std::size_t source_iteration = 0;  // index into SafeSet::iterations()
  std::size_t nearest = 0;           // window start index
};

/// The controller's per-step view of the safe set: local fits of the
/// last two stored laps (duplicated when only one exists).
struct LocalApproximation {
  IterationLocalFit prev1;  // most recent lap
  IterationLocalFit prev2;  // second most recent, or a copy of prev1

  /// Intersection of the two fit windows in s.
  double s_lo() const;
  double s_hi() const;
};

/// Builds the local approximation around x_t with polynomial windows of
/// 4*horizon+1 points. Throws std::invalid_argument on an empty safe set.
LocalApproximation local_approximation(const SafeSet& safeset,
                                       const VehicleState& x_t, int horizon);

/// Relaxed cost-to-go: lambda-blend of the two local cost fits. Throws
/// std::out_of_range when s_terminal leaves the common fit window.
double q_tilde(const LocalApproximation& approx, double s_terminal,
               double lambda);

}  // namespace racelmpc
