#include "snapopt/minsnap.hpp"

#include <cmath>
#include <stdexcept>

namespace snapopt {

namespace {

// Falling factorial j(j-1)...(j-order+1), the monomial differentiation factor.
double fall(int j, int order) {
  double f = 1.0;
  for (int q = 0; q < order; ++q) f *= static_cast<double>(j - q);
  return f;
}

// Gram matrix of the order-th derivative of the monomial basis on [0, tau]:
// M[j,k] = fall(j)fall(k) tau^(j+k-2*order+1) / (j+k-2*order+1).
Eigen::MatrixXd derivative_gram(int degree, int order, double tau) {
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
  for (int j = order; j <= degree; ++j) {
    for (int k = order; k <= degree; ++k) {
      const int pow = j + k - 2 * order + 1;
      gram(j, k) = fall(j, order) * fall(k, order) * std::pow(tau, pow) / pow;
    }
  }
  return gram;
}

// d/dtau of derivative_gram.
Eigen::MatrixXd derivative_gram_dtau(int degree, int order, double tau) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
  for (int j = order; j <= degree; ++j) {
    for (int k = order; k <= degree; ++k) {
      const int pow = j + k - 2 * order;
      grad(j, k) = fall(j, order) * fall(k, order) * std::pow(tau, pow);
    }
  }
  return grad;
}

struct Layout {
  int n_seg;
  int ncoef;
  int n_axes;   // 3 or 4 (yaw last)
  int d;        // total variables
  int pos_eq;   // equality rows per position axis
  int yaw_eq;   // equality rows for the yaw axis (0 when unplanned)

  int col(int axis, int seg, int k) const { return axis * n_seg * ncoef + seg * ncoef + k; }
  int eq_begin(int axis) const { return axis * pos_eq; }
  int axis_eq_count(int axis) const { return axis < 3 ? pos_eq : yaw_eq; }
};

Layout make_layout(int n_seg, int degree, bool with_yaw) {
  Layout L;
  L.n_seg = n_seg;
  L.ncoef = degree + 1;
  L.n_axes = with_yaw ? 4 : 3;
  L.d = L.n_axes * n_seg * L.ncoef;
  L.pos_eq = 8 + 5 * (n_seg - 1);
  L.yaw_eq = with_yaw ? 4 + 2 * (n_seg - 1) : 0;
  return L;
}

void validate_inputs(const KeypointPath& xi, const TimeAllocation& times,
                     const std::optional<CorridorSpec>& corridor, double mu_r,
                     double mu_psi, int degree) {
  if (xi.n_keypoints() < 2) throw std::invalid_argument("need at least 2 key points");
  if (times.n_segments() != xi.n_segments())
    throw std::invalid_argument("duration count does not match key-point count");
  if ((times.durations.array() <= 0.0).any())
    throw std::invalid_argument("zero or negative segment duration; floor durations first");
  if (mu_r < 0.0 || mu_psi < 0.0 || (mu_r == 0.0 && mu_psi == 0.0))
    throw std::invalid_argument("weights must be nonnegative and not both zero");
  if (degree < 7) throw std::invalid_argument("degree must be >= 7 for snap planning");
  if (xi.yaw) {
    if (xi.yaw->size() != xi.n_keypoints())
      throw std::invalid_argument("yaw count does not match key-point count");
    if (!(mu_psi > 0.0))
      throw std::invalid_argument("yaw planning requires mu_psi > 0");
  }
  if (corridor) {
    if (!(corridor->half_width > 0.0)) throw std::invalid_argument("corridor width must be positive");
    if (corridor->samples_per_segment < 1)
      throw std::invalid_argument("corridor needs at least one sample per segment");
  }
}

}  // namespace

QpProblem assemble(const KeypointPath& xi, const TimeAllocation& times,
                   const BoundaryConditions& bc,
                   const std::optional<CorridorSpec>& corridor, double mu_r,
                   double mu_psi, int degree) {
  validate_inputs(xi, times, corridor, mu_r, mu_psi, degree);

  const int n_seg = xi.n_segments();
  const bool with_yaw = xi.yaw.has_value();
  const Layout L = make_layout(n_seg, degree, with_yaw);
  const Eigen::VectorXd& tau = times.durations;

  const int p = 3 * L.pos_eq + L.yaw_eq;
  int q = 0;
  int n_corridor_axes = 0;
  if (corridor) {
    for (bool on : corridor->axes) n_corridor_axes += on ? 1 : 0;
    q = n_corridor_axes * n_seg * corridor->samples_per_segment * 2;
  }

  QpProblem pb;
  pb.Q = Eigen::MatrixXd::Zero(L.d, L.d);
  pb.A = Eigen::MatrixXd::Zero(p, L.d);
  pb.b = Eigen::VectorXd::Zero(p);
  pb.G = Eigen::MatrixXd::Zero(q, L.d);
  pb.h = Eigen::VectorXd::Zero(q);

  // Hessian: block-diagonal snap Gram per position axis/segment; yaw uses the
  // second-derivative Gram.
  for (int a = 0; a < L.n_axes; ++a) {
    const int order = a < 3 ? 4 : 2;
    const double mu = a < 3 ? mu_r : mu_psi;
    if (mu == 0.0) continue;
    for (int i = 0; i < n_seg; ++i) {
      const Eigen::MatrixXd gram = mu * derivative_gram(degree, order, tau[i]);
      pb.Q.block(L.col(a, i, 0), L.col(a, i, 0), L.ncoef, L.ncoef) = gram;
    }
  }

  // Equality constraints, grouped per axis.
  for (int a = 0; a < 3; ++a) {
    int r = L.eq_begin(a);
    // Start derivatives, orders 0..3 at local time 0 of segment 0.
    for (int k = 0; k <= 3; ++k, ++r) {
      pb.A.row(r).segment(L.col(a, 0, 0), L.ncoef) = monomial_derivative_row(degree, k, 0.0);
      pb.b[r] = k == 0 ? xi.points(0, a) : bc.start_derivs(k - 1, a);
    }
    // End derivatives at local time tau[n-1] of the last segment.
    for (int k = 0; k <= 3; ++k, ++r) {
      pb.A.row(r).segment(L.col(a, n_seg - 1, 0), L.ncoef) =
          monomial_derivative_row(degree, k, tau[n_seg - 1]);
      pb.b[r] = k == 0 ? xi.points(n_seg, a) : bc.end_derivs(k - 1, a);
    }
    // Intermediate waypoint pass-through.
    for (int i = 0; i + 1 < n_seg; ++i, ++r) {
      pb.A.row(r).segment(L.col(a, i, 0), L.ncoef) = monomial_derivative_row(degree, 0, tau[i]);
      pb.b[r] = xi.points(i + 1, a);
    }
    // Continuity through jerk at interior knots.
    for (int i = 0; i + 1 < n_seg; ++i) {
      for (int k = 0; k <= 3; ++k, ++r) {
        pb.A.row(r).segment(L.col(a, i, 0), L.ncoef) = monomial_derivative_row(degree, k, tau[i]);
        pb.A.row(r).segment(L.col(a, i + 1, 0), L.ncoef) -= monomial_derivative_row(degree, k, 0.0);
      }
    }
  }
  if (with_yaw) {
    const Eigen::VectorXd& yaw = *xi.yaw;
    int r = L.eq_begin(3);
    for (int k = 0; k <= 1; ++k, ++r) {
      pb.A.row(r).segment(L.col(3, 0, 0), L.ncoef) = monomial_derivative_row(degree, k, 0.0);
      pb.b[r] = k == 0 ? yaw[0] : bc.start_yaw_rate;
    }
    for (int k = 0; k <= 1; ++k, ++r) {
      pb.A.row(r).segment(L.col(3, n_seg - 1, 0), L.ncoef) =
          monomial_derivative_row(degree, k, tau[n_seg - 1]);
      pb.b[r] = k == 0 ? yaw[n_seg] : bc.end_yaw_rate;
    }
    for (int i = 0; i + 1 < n_seg; ++i) {
      for (int k = 0; k <= 1; ++k, ++r) {
        pb.A.row(r).segment(L.col(3, i, 0), L.ncoef) = monomial_derivative_row(degree, k, tau[i]);
        pb.A.row(r).segment(L.col(3, i + 1, 0), L.ncoef) -= monomial_derivative_row(degree, k, 0.0);
      }
    }
  }

  // Corridor bounds at interior sample fractions, axis-major row order.
  if (corridor) {
    const int S = corridor->samples_per_segment;
    int r = 0;
    for (int a = 0; a < 3; ++a) {
      if (!corridor->axes[a]) continue;
      for (int i = 0; i < n_seg; ++i) {
        for (int s = 1; s <= S; ++s) {
          const double f = static_cast<double>(s) / (S + 1);
          const Eigen::VectorXd omega = monomial_derivative_row(degree, 0, f * tau[i]);
          const double line = (1.0 - f) * xi.points(i, a) + f * xi.points(i + 1, a);
          pb.G.row(r).segment(L.col(a, i, 0), L.ncoef) = omega;
          pb.h[r] = corridor->half_width + line;
          ++r;
          pb.G.row(r).segment(L.col(a, i, 0), L.ncoef) = -omega;
          pb.h[r] = corridor->half_width - line;
          ++r;
        }
      }
    }
  }

  // Decoupling metadata: every constraint row touches exactly one axis.
  int ineq_cursor = 0;
  for (int a = 0; a < L.n_axes; ++a) {
    AxisBlock blk;
    blk.axis = a;
    blk.col_begin = L.col(a, 0, 0);
    blk.col_count = n_seg * L.ncoef;
    blk.eq_begin = L.eq_begin(a);
    blk.eq_count = L.axis_eq_count(a);
    if (corridor && a < 3 && corridor->axes[a]) {
      blk.ineq_begin = ineq_cursor;
      blk.ineq_count = n_seg * corridor->samples_per_segment * 2;
      ineq_cursor += blk.ineq_count;
    }
    pb.axis_blocks.push_back(blk);
  }

  QpProblem::Assembly info;
  info.keypoints = xi.points;
  info.yaw = xi.yaw;
  info.durations = times.durations;
  info.bc = bc;
  info.corridor = corridor;
  info.mu_r = mu_r;
  info.mu_psi = mu_psi;
  info.degree = degree;
  info.n_axes = L.n_axes;
  pb.assembly = std::move(info);
  return pb;
}

ParamJacobians assemble_jacobians(const QpProblem& problem, const KeypointPath& xi,
                                  const TimeAllocation& times) {
  if (!problem.assembly) throw std::invalid_argument("problem lacks assembly provenance");
  const QpProblem::Assembly& info = *problem.assembly;
  if (info.keypoints.rows() != xi.points.rows() || info.keypoints != xi.points ||
      info.durations.size() != times.durations.size() || info.durations != times.durations) {
    throw std::invalid_argument("jacobian inputs do not match assembled problem");
  }

  const int n_seg = xi.n_segments();
  const int degree = info.degree;
  const bool with_yaw = info.yaw.has_value();
  const Layout L = make_layout(n_seg, degree, with_yaw);
  const Eigen::VectorXd& tau = times.durations;

  ParamJacobians jac;
  jac.dQ_dtau.assign(n_seg, Eigen::MatrixXd::Zero(L.d, L.d));
  jac.dA_dtau.assign(n_seg, Eigen::MatrixXd::Zero(problem.n_eq(), L.d));
  jac.dG_dtau.assign(n_seg, Eigen::MatrixXd::Zero(problem.n_ineq(), L.d));

  for (int a = 0; a < 3; ++a) {
    const int base = L.eq_begin(a);
    jac.db_dxi.push_back({base + 0, 0, a, 1.0});           // start position row
    jac.db_dxi.push_back({base + 4, n_seg, a, 1.0});       // end position row
    for (int i = 0; i + 1 < n_seg; ++i) {
      jac.db_dxi.push_back({base + 8 + i, i + 1, a, 1.0});  // pass-through rows
    }
  }

  for (int s = 0; s < n_seg; ++s) {
    for (int a = 0; a < L.n_axes; ++a) {
      const int order = a < 3 ? 4 : 2;
      const double mu = a < 3 ? info.mu_r : info.mu_psi;
      if (mu != 0.0) {
        jac.dQ_dtau[s].block(L.col(a, s, 0), L.col(a, s, 0), L.ncoef, L.ncoef) =
            mu * derivative_gram_dtau(degree, order, tau[s]);
      }

      const int base = L.eq_begin(a);
      const int max_k = a < 3 ? 3 : 1;
      const int n_boundary = max_k + 1;
      if (s == n_seg - 1) {
        for (int k = 0; k <= max_k; ++k) {
          jac.dA_dtau[s].row(base + n_boundary + k).segment(L.col(a, s, 0), L.ncoef) =
              monomial_derivative_row(degree, k + 1, tau[s]);
        }
      }
      if (s + 1 < n_seg) {
        if (a < 3) {
          jac.dA_dtau[s].row(base + 8 + s).segment(L.col(a, s, 0), L.ncoef) =
              monomial_derivative_row(degree, 1, tau[s]);
        }
        const int cont_base = a < 3 ? base + 8 + (n_seg - 1) : base + 4;
        for (int k = 0; k <= max_k; ++k) {
          jac.dA_dtau[s].row(cont_base + s * n_boundary + k).segment(L.col(a, s, 0), L.ncoef) =
              monomial_derivative_row(degree, k + 1, tau[s]);
        }
      }
    }
  }

  if (info.corridor) {
    const CorridorSpec& cs = *info.corridor;
    const int S = cs.samples_per_segment;
    int r = 0;
    for (int a = 0; a < 3; ++a) {
      if (!cs.axes[a]) continue;
      for (int i = 0; i < n_seg; ++i) {
        for (int s = 1; s <= S; ++s) {
          const double f = static_cast<double>(s) / (S + 1);
          const Eigen::VectorXd domega = f * monomial_derivative_row(degree, 1, f * tau[i]);
          jac.dG_dtau[i].row(r).segment(L.col(a, i, 0), L.ncoef) = domega;
          jac.dh_dxi.push_back({r, i, a, 1.0 - f});
          jac.dh_dxi.push_back({r, i + 1, a, f});
          ++r;
          jac.dG_dtau[i].row(r).segment(L.col(a, i, 0), L.ncoef) = -domega;
          jac.dh_dxi.push_back({r, i, a, -(1.0 - f)});
          jac.dh_dxi.push_back({r, i + 1, a, -f});
          ++r;
        }
      }
    }
  }

  return jac;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> chain_grad_keypoints(
    const ParamJacobians& jac, const Eigen::VectorXd& grad_b,
    const Eigen::VectorXd& grad_h, int n_keypoints) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> grad =
      Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n_keypoints, 3);
  for (const RhsKeypointEntry& e : jac.db_dxi) {
    if (grad_b.size() > 0) grad(e.kp, e.axis) += e.weight * grad_b[e.row];
  }
  for (const RhsKeypointEntry& e : jac.dh_dxi) {
    if (grad_h.size() > 0) grad(e.kp, e.axis) += e.weight * grad_h[e.row];
  }
  return grad;
}

Eigen::VectorXd chain_grad_durations(const ParamJacobians& jac,
                                     const Eigen::MatrixXd& grad_Q,
                                     const Eigen::MatrixXd& grad_A,
                                     const Eigen::MatrixXd& grad_G) {
  const int n_seg = static_cast<int>(jac.dQ_dtau.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_seg);
  for (int s = 0; s < n_seg; ++s) {
    double g = 0.0;
    if (grad_Q.size() > 0) g += grad_Q.cwiseProduct(jac.dQ_dtau[s]).sum();
    if (grad_A.size() > 0) g += grad_A.cwiseProduct(jac.dA_dtau[s]).sum();
    if (grad_G.size() > 0) g += grad_G.cwiseProduct(jac.dG_dtau[s]).sum();
    grad[s] = g;
  }
  return grad;
}

PiecewisePolynomial trajectory_from_solution(const QpProblem& problem,
                                             const Eigen::VectorXd& c) {
  if (!problem.assembly) throw std::invalid_argument("problem lacks assembly provenance");
  const QpProblem::Assembly& info = *problem.assembly;
  if (c.size() != problem.n_vars()) throw std::invalid_argument("solution size mismatch");

  const int n_seg = static_cast<int>(info.durations.size());
  const Layout L = make_layout(n_seg, info.degree, info.n_axes == 4);
  PiecewisePolynomial poly(n_seg, info.n_axes, info.degree);
  poly.set_segment_durations(info.durations);
  for (int a = 0; a < info.n_axes; ++a) {
    for (int i = 0; i < n_seg; ++i) {
      for (int k = 0; k <= info.degree; ++k) {
        poly.coeff(i, a, k) = c[L.col(a, i, k)];
      }
    }
  }
  return poly;
}

}  // namespace snapopt
