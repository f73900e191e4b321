#pragma once

#include <Eigen/Dense>

#include <vector>

namespace snapopt {

/// Piecewise polynomial trajectory in flat-output space (position, optional
/// yaw). Each segment stores monomial coefficients in local time t in
/// [0, duration_i]; axis 3, when present, is yaw.
class PiecewisePolynomial {
 public:
  static constexpr int kDefaultDegree = 7;

  PiecewisePolynomial() = default;
  PiecewisePolynomial(int n_segments, int n_axes, int degree = kDefaultDegree);

  int n_segments() const { return static_cast<int>(coeffs_.size()); }
  int n_axes() const { return n_axes_; }
  int degree() const { return degree_; }
  bool has_yaw() const { return n_axes_ == 4; }

  double total_duration() const { return durations_.sum(); }
  const Eigen::VectorXd& segment_durations() const { return durations_; }
  void set_segment_durations(const Eigen::VectorXd& durations);

  // Coefficient c_k of axis `axis` on segment `seg`: p(t) = sum_k c_k t^k.
  double coeff(int seg, int axis, int k) const { return coeffs_[seg](axis, k); }
  double& coeff(int seg, int axis, int k) { return coeffs_[seg](axis, k); }

  // Per-segment coefficient matrix, n_axes x (degree+1).
  const Eigen::MatrixXd& segment_coeffs(int seg) const { return coeffs_[seg]; }
  Eigen::MatrixXd& segment_coeffs(int seg) { return coeffs_[seg]; }

  // Segment containing global time t; knots resolve to the left segment.
  // Returns (segment index, local time).
  std::pair<int, double> locate(double t) const;

 private:
  std::vector<Eigen::MatrixXd> coeffs_;
  Eigen::VectorXd durations_;
  int n_axes_ = 3;
  int degree_ = kDefaultDegree;
};

struct TrajectorySample {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  // Row k-1 holds the order-k position derivative (velocity, acceleration, ...).
  Eigen::Matrix<double, Eigen::Dynamic, 3> derivatives;
  double yaw = 0.0;
  double yaw_rate = 0.0;
  bool has_yaw = false;

  Eigen::Vector3d derivative(int order) const;
  Eigen::Vector3d velocity() const { return derivative(1); }
  Eigen::Vector3d acceleration() const { return derivative(2); }
  Eigen::Vector3d jerk() const { return derivative(3); }
  Eigen::Vector3d snap() const { return derivative(4); }
};

// Evaluates position and derivatives up to max_order at global time t.
// Throws std::domain_error for t outside [0, total_duration] and
// std::invalid_argument for max_order outside [0, degree].
TrajectorySample evaluate(const PiecewisePolynomial& poly, double t, int max_order = 4);

// Integral of mu_r*||d^4 r/dt^4||^2 + mu_psi*(d^2 psi/dt^2)^2 over the whole
// trajectory, by per-segment Gauss-Legendre quadrature that is exact for the
// polynomial integrand.
double snap_integral(const PiecewisePolynomial& poly, double mu_r = 1.0, double mu_psi = 0.0);

// Samples at t = 0, 1/rate, ... plus the terminal time when it does not fall
// on the lattice. rate must be positive.
std::vector<TrajectorySample> sample_uniform(const PiecewisePolynomial& poly, double rate);

// d^order/dt^order of the monomial basis [1, t, ..., t^degree] at local time t.
Eigen::VectorXd monomial_derivative_row(int degree, int order, double t);

}  // namespace snapopt
