#include "snapopt/piecewise_poly.hpp"

#include <cmath>
#include <stdexcept>

namespace snapopt {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1], exact through degree 15. Enough for
// squared snap (degree 2(m-4)) and squared yaw acceleration (degree 2(m-2))
// at any degree m <= 9.
constexpr int kQuadNodes = 8;
constexpr double kQuadX[kQuadNodes] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr double kQuadW[kQuadNodes] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

double eval_axis(const Eigen::MatrixXd& seg_coeffs, int axis, int order, double t) {
  const int degree = static_cast<int>(seg_coeffs.cols()) - 1;
  double acc = 0.0;
  double tn = 1.0;
  for (int j = order; j <= degree; ++j) {
    double fall = 1.0;
    for (int q = 0; q < order; ++q) fall *= static_cast<double>(j - q);
    acc += fall * seg_coeffs(axis, j) * tn;
    tn *= t;
  }
  return acc;
}

}  // namespace

PiecewisePolynomial::PiecewisePolynomial(int n_segments, int n_axes, int degree)
    : n_axes_(n_axes), degree_(degree) {
  if (n_segments < 1) throw std::invalid_argument("n_segments must be >= 1");
  if (n_axes != 3 && n_axes != 4) throw std::invalid_argument("n_axes must be 3 or 4");
  if (degree < 1) throw std::invalid_argument("degree must be >= 1");
  coeffs_.assign(n_segments, Eigen::MatrixXd::Zero(n_axes, degree + 1));
  durations_ = Eigen::VectorXd::Ones(n_segments);
}

void PiecewisePolynomial::set_segment_durations(const Eigen::VectorXd& durations) {
  if (durations.size() != n_segments())
    throw std::invalid_argument("duration count does not match segment count");
  if ((durations.array() <= 0.0).any())
    throw std::invalid_argument("segment durations must be strictly positive");
  durations_ = durations;
}

std::pair<int, double> PiecewisePolynomial::locate(double t) const {
  double start = 0.0;
  for (int i = 0; i < n_segments(); ++i) {
    const double end = start + durations_[i];
    // Knots resolve to the left segment: t == end selects segment i.
    if (t <= end || i == n_segments() - 1) {
      return {i, std::min(t - start, durations_[i])};
    }
    start = end;
  }
  return {n_segments() - 1, durations_[n_segments() - 1]};
}

Eigen::Vector3d TrajectorySample::derivative(int order) const {
  if (order == 0) return position;
  if (order < 1 || order > derivatives.rows())
    throw std::invalid_argument("derivative order not evaluated");
  return derivatives.row(order - 1);
}

TrajectorySample evaluate(const PiecewisePolynomial& poly, double t, int max_order) {
  const double total = poly.total_duration();
  const double slack = 1e-9 * std::max(1.0, total);
  if (!(t >= -slack && t <= total + slack))
    throw std::domain_error("evaluation time outside trajectory duration");
  if (max_order < 0 || max_order > poly.degree())
    throw std::invalid_argument("max_order must be in [0, degree]");
  t = std::clamp(t, 0.0, total);

  const auto [seg, local] = poly.locate(t);
  const Eigen::MatrixXd& c = poly.segment_coeffs(seg);

  TrajectorySample out;
  out.t = t;
  out.has_yaw = poly.has_yaw();
  for (int a = 0; a < 3; ++a) out.position[a] = eval_axis(c, a, 0, local);
  out.derivatives.setZero(std::max(max_order, 0), 3);
  for (int k = 1; k <= max_order; ++k) {
    for (int a = 0; a < 3; ++a) out.derivatives(k - 1, a) = eval_axis(c, a, k, local);
  }
  if (poly.has_yaw()) {
    out.yaw = eval_axis(c, 3, 0, local);
    out.yaw_rate = eval_axis(c, 3, 1, local);
  }
  return out;
}

double snap_integral(const PiecewisePolynomial& poly, double mu_r, double mu_psi) {
  double total = 0.0;
  for (int i = 0; i < poly.n_segments(); ++i) {
    const double tau = poly.segment_durations()[i];
    const Eigen::MatrixXd& c = poly.segment_coeffs(i);
    const double half = 0.5 * tau;
    for (int q = 0; q < kQuadNodes; ++q) {
      const double t = half * (kQuadX[q] + 1.0);
      const double w = half * kQuadW[q];
      if (mu_r != 0.0) {
        double s2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double s = eval_axis(c, a, 4, t);
          s2 += s * s;
        }
        total += w * mu_r * s2;
      }
      if (mu_psi != 0.0 && poly.has_yaw()) {
        const double ydd = eval_axis(c, 3, 2, t);
        total += w * mu_psi * ydd * ydd;
      }
    }
  }
  return total;
}

std::vector<TrajectorySample> sample_uniform(const PiecewisePolynomial& poly, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  const double total = poly.total_duration();
  const long n_lattice = static_cast<long>(std::floor(total * rate + 1e-9));
  const double last_lattice = static_cast<double>(n_lattice) / rate;
  const bool terminal_on_lattice = std::abs(total - last_lattice) <= 1e-9 * std::max(1.0, total);

  std::vector<TrajectorySample> samples;
  samples.reserve(static_cast<size_t>(n_lattice) + 2);
  const int max_order = std::min(4, poly.degree());
  for (long i = 0; i <= n_lattice; ++i) {
    samples.push_back(evaluate(poly, static_cast<double>(i) / rate, max_order));
  }
  if (!terminal_on_lattice) samples.push_back(evaluate(poly, total, max_order));
  return samples;
}

Eigen::VectorXd monomial_derivative_row(int degree, int order, double t) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(degree + 1);
  double tn = 1.0;
  for (int j = order; j <= degree; ++j) {
    double fall = 1.0;
    for (int q = 0; q < order; ++q) fall *= static_cast<double>(j - q);
    row[j] = fall * tn;
    tn *= t;
  }
  return row;
}

}  // namespace snapopt
