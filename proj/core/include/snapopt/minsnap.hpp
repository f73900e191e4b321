#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "snapopt/piecewise_poly.hpp"
#include "snapopt/types.hpp"

namespace snapopt {

// Column range plus equality/inequality row ranges owned by one decoupled
// axis. Rows and columns of different blocks never interact in (Q, A, G).
struct AxisBlock {
  int axis = 0;
  int col_begin = 0;
  int col_count = 0;
  int eq_begin = 0;
  int eq_count = 0;
  int ineq_begin = 0;
  int ineq_count = 0;
};

// min c^T Q c  s.t.  A c = b,  G c <= h.
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  std::vector<AxisBlock> axis_blocks;

  int n_vars() const { return static_cast<int>(Q.rows()); }
  int n_eq() const { return static_cast<int>(A.rows()); }
  int n_ineq() const { return static_cast<int>(G.rows()); }

  // Inputs the problem was assembled from, kept for Jacobian provenance
  // checks and for mapping solutions back to trajectories.
  struct Assembly {
    Eigen::Matrix<double, Eigen::Dynamic, 3> keypoints;
    std::optional<Eigen::VectorXd> yaw;
    Eigen::VectorXd durations;
    BoundaryConditions bc;
    std::optional<CorridorSpec> corridor;
    double mu_r = 1.0;
    double mu_psi = 0.0;
    int degree = PiecewisePolynomial::kDefaultDegree;
    int n_axes = 3;
  };
  std::optional<Assembly> assembly;
};

// Sparse derivative of a constraint right-hand side w.r.t. one key-point
// coordinate: d(rhs[row])/d(points(kp, axis)) = weight.
struct RhsKeypointEntry {
  int row = 0;
  int kp = 0;
  int axis = 0;
  double weight = 1.0;
};

// Derivatives of the assembled matrices w.r.t. the key points and the
// per-segment durations, all analytic.
struct ParamJacobians {
  std::vector<RhsKeypointEntry> db_dxi;
  std::vector<RhsKeypointEntry> dh_dxi;
  std::vector<Eigen::MatrixXd> dQ_dtau;  // one d x d matrix per segment
  std::vector<Eigen::MatrixXd> dA_dtau;  // one p x d matrix per segment
  std::vector<Eigen::MatrixXd> dG_dtau;  // one q x d matrix per segment
};

// Assembles the minimum-snap QP. Equality rows per position axis:
// 4 start derivatives (orders 0..3), 4 end derivatives, n-1 intermediate
// pass-throughs, 4(n-1) continuity rows. Yaw, when planned, contributes
// value/rate boundary rows and continuity through the first derivative.
// Decision variables are axis-major: axis, then segment, then power.
QpProblem assemble(const KeypointPath& xi, const TimeAllocation& times,
                   const BoundaryConditions& bc,
                   const std::optional<CorridorSpec>& corridor = std::nullopt,
                   double mu_r = 1.0, double mu_psi = 0.0,
                   int degree = PiecewisePolynomial::kDefaultDegree);

// Analytic parameter Jacobians for a problem produced by assemble() from the
// same xi and times; throws std::invalid_argument on mismatched provenance.
ParamJacobians assemble_jacobians(const QpProblem& problem, const KeypointPath& xi,
                                  const TimeAllocation& times);

// Chain-rule helpers: fold QP-level gradients back to the assembly inputs.
Eigen::Matrix<double, Eigen::Dynamic, 3> chain_grad_keypoints(
    const ParamJacobians& jac, const Eigen::VectorXd& grad_b,
    const Eigen::VectorXd& grad_h, int n_keypoints);
Eigen::VectorXd chain_grad_durations(const ParamJacobians& jac,
                                     const Eigen::MatrixXd& grad_Q,
                                     const Eigen::MatrixXd& grad_A,
                                     const Eigen::MatrixXd& grad_G);

// Reshapes a QP solution vector into the trajectory it parameterizes.
PiecewisePolynomial trajectory_from_solution(const QpProblem& problem,
                                             const Eigen::VectorXd& c);

}  // namespace snapopt
