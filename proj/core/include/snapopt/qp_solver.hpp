#pragma once

#include <Eigen/Dense>

#include "snapopt/minsnap.hpp"

namespace snapopt {

enum class QpStatus { optimal, max_iter, infeasible };

struct QpSolution {
  Eigen::VectorXd primal;  // c*
  Eigen::VectorXd nu;      // equality duals
  Eigen::VectorXd lambda;  // inequality duals, >= 0
  double objective = 0.0;  // c*^T Q c*
  int iterations = 0;
  QpStatus status = QpStatus::infeasible;

  // KKT residuals at the returned iterate. Stationarity is for the internal
  // convention 2Qc + A^T nu + G^T lambda.
  double stationarity = 0.0;
  double eq_residual = 0.0;
  double ineq_residual = 0.0;
  double comp_residual = 0.0;
  // min_i max(lambda_i, s_i); below 1e-7 the instance is weakly complementary.
  double strict_comp_margin = std::numeric_limits<double>::infinity();
};

// Gradients of a scalar loss w.r.t. the QP data, produced by one transposed
// solve of the differentiated KKT system at the optimum. grad_Q is expressed
// w.r.t. the stored Q of min c^T Q c.
struct SolveGradients {
  Eigen::VectorXd grad_b;
  Eigen::VectorXd grad_h;
  Eigen::MatrixXd grad_Q;
  Eigen::MatrixXd grad_A;
  Eigen::MatrixXd grad_G;
  bool degenerate = false;
};

struct QpSolveOptions {
  double tol = 1e-9;
  int max_iter = 100;
  // Solve decoupled axis blocks independently when metadata is present.
  bool use_blocks = true;
};

// Solves min c^T Q c s.t. Ac = b, Gc <= h. Equality-only problems go through
// a single KKT factorization; inequality problems run a primal-dual
// interior-point method with Mehrotra predictor-corrector steps.
QpSolution solve(const QpProblem& problem, const QpSolveOptions& opts = {});
QpSolution solve(const QpProblem& problem, double tol, int max_iter = 100);

// Backward pass: given dL/dc*, returns dL/d(b, h, Q, A, G) by solving the
// transposed differentiated KKT system once. Throws std::invalid_argument
// unless solution.status == optimal. Weakly complementary optima fall back to
// a least-squares solve and set the degenerate flag.
SolveGradients backward(const QpProblem& problem, const QpSolution& solution,
                        const Eigen::VectorXd& grad_c);

}  // namespace snapopt
