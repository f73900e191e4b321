#include "snapopt/qp_solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace snapopt {

namespace {

struct DenseQp {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void fill_residuals(const DenseQp& qp, QpSolution& sol) {
  const Eigen::VectorXd& x = sol.primal;
  Eigen::VectorXd stat = 2.0 * qp.Q * x;
  if (qp.A.rows() > 0) stat += qp.A.transpose() * sol.nu;
  if (qp.G.rows() > 0) stat += qp.G.transpose() * sol.lambda;
  sol.stationarity = inf_norm(stat);
  sol.eq_residual = qp.A.rows() ? inf_norm(qp.A * x - qp.b) : 0.0;
  sol.ineq_residual = 0.0;
  sol.comp_residual = 0.0;
  sol.strict_comp_margin = std::numeric_limits<double>::infinity();
  if (qp.G.rows() > 0) {
    const Eigen::VectorXd slack = qp.h - qp.G * x;
    sol.ineq_residual = std::max(0.0, (-slack).maxCoeff());
    for (int i = 0; i < slack.size(); ++i) {
      sol.comp_residual = std::max(sol.comp_residual, std::abs(sol.lambda[i] * slack[i]));
      sol.strict_comp_margin =
          std::min(sol.strict_comp_margin, std::max(sol.lambda[i], slack[i]));
    }
  }
  sol.objective = x.dot(qp.Q * x);
  sol.iterations = std::max(sol.iterations, 1);
}

// Equality-constrained KKT solve: [2Q A^T; A 0][c; nu] = [0; b].
QpSolution solve_equality(const DenseQp& qp, const QpSolveOptions& opts) {
  const int d = static_cast<int>(qp.Q.rows());
  const int p = static_cast<int>(qp.A.rows());
  QpSolution sol;
  sol.primal = Eigen::VectorXd::Zero(d);
  sol.nu = Eigen::VectorXd::Zero(p);
  sol.lambda = Eigen::VectorXd::Zero(0);
  sol.iterations = 1;
  if (p == 0) {
    sol.status = QpStatus::optimal;
    fill_residuals(qp, sol);
    return sol;
  }

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d + p, d + p);
  K.topLeftCorner(d, d) = 2.0 * qp.Q;
  K.topRightCorner(d, p) = qp.A.transpose();
  K.bottomLeftCorner(p, d) = qp.A;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + p);
  rhs.tail(p) = qp.b;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd z = lu.solve(rhs);
  // One step of iterative refinement keeps residuals near machine precision
  // even for poorly scaled snap Hessians.
  z += lu.solve(rhs - K * z);
  if (!z.allFinite()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(K);
    z = qr.solve(rhs);
  }

  sol.primal = z.head(d);
  sol.nu = z.tail(p);
  fill_residuals(qp, sol);
  sol.status = (z.allFinite() && sol.eq_residual <= 1e-6 * (1.0 + inf_norm(qp.b)))
                   ? QpStatus::optimal
                   : QpStatus::infeasible;
  return sol;
}

// Primal-dual interior-point method with Mehrotra predictor-corrector.
QpSolution solve_ipm(const DenseQp& qp, const QpSolveOptions& opts) {
  const int d = static_cast<int>(qp.Q.rows());
  const int p = static_cast<int>(qp.A.rows());
  const int q = static_cast<int>(qp.G.rows());
  const Eigen::MatrixXd P = 2.0 * qp.Q;

  // Starting point from the W = I relaxed KKT system.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(p);
  {
    Eigen::MatrixXd K0 = Eigen::MatrixXd::Zero(d + p + q, d + p + q);
    K0.topLeftCorner(d, d) = P;
    if (p) {
      K0.block(0, d, d, p) = qp.A.transpose();
      K0.block(d, 0, p, d) = qp.A;
    }
    K0.block(0, d + p, d, q) = qp.G.transpose();
    K0.block(d + p, 0, q, d) = qp.G;
    K0.bottomRightCorner(q, q) = -Eigen::MatrixXd::Identity(q, q);
    Eigen::VectorXd rhs0 = Eigen::VectorXd::Zero(d + p + q);
    if (p) rhs0.segment(d, p) = qp.b;
    rhs0.tail(q) = qp.h;
    Eigen::VectorXd z0 = K0.partialPivLu().solve(rhs0);
    if (z0.allFinite()) {
      x = z0.head(d);
      if (p) nu = z0.segment(d, p);
    }
  }
  Eigen::VectorXd s = qp.h - qp.G * x;
  const double smin = s.size() ? s.minCoeff() : 1.0;
  if (smin <= 0.0) s.array() += 1.0 - smin;
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(q);

  const double scale_b = 1.0 + inf_norm(qp.b);
  const double scale_h = 1.0 + inf_norm(qp.h);

  QpSolution best;
  best.primal = x;
  best.nu = nu;
  best.lambda = lambda;
  double best_score = std::numeric_limits<double>::infinity();
  int iter = 0;
  bool converged = false;

  for (; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd r_d = P * x + (p ? (qp.A.transpose() * nu).eval()
                                            : Eigen::VectorXd::Zero(d)) +
                                qp.G.transpose() * lambda;
    const Eigen::VectorXd r_p = p ? (qp.A * x - qp.b).eval() : Eigen::VectorXd();
    const Eigen::VectorXd r_g = qp.G * x + s - qp.h;
    const double mu = s.dot(lambda) / q;
    const double comp_max = (s.array() * lambda.array()).abs().maxCoeff();

    const double scale_stat =
        1.0 + inf_norm(P * x) + (p ? inf_norm(qp.A.transpose() * nu) : 0.0) +
        inf_norm(qp.G.transpose() * lambda);
    const double score = inf_norm(r_d) / scale_stat + (p ? inf_norm(r_p) / scale_b : 0.0) +
                         inf_norm(r_g) / scale_h + comp_max / scale_h;
    if (score < best_score && x.allFinite() && lambda.allFinite()) {
      best_score = score;
      best.primal = x;
      best.nu = nu;
      best.lambda = lambda;
    }

    if (inf_norm(r_d) <= opts.tol * scale_stat && (p == 0 || inf_norm(r_p) <= opts.tol * scale_b) &&
        inf_norm(r_g) <= opts.tol * scale_h && comp_max <= opts.tol * scale_h) {
      converged = true;
      break;
    }
    if (!x.allFinite() || !lambda.allFinite() || !s.allFinite()) break;

    const Eigen::VectorXd dvec = lambda.array() / s.array();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d + p, d + p);
    M.topLeftCorner(d, d) = P + qp.G.transpose() * dvec.asDiagonal() * qp.G;
    if (p) {
      M.topRightCorner(d, p) = qp.A.transpose();
      M.bottomLeftCorner(p, d) = qp.A;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const auto msolve = [&](const Eigen::VectorXd& rhs) {
      Eigen::VectorXd sol = lu.solve(rhs);
      sol += lu.solve(rhs - M * sol);
      return sol;
    };

    // Affine (predictor) direction.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + p);
    rhs.head(d) = -r_d + qp.G.transpose() * (lambda - dvec.cwiseProduct(r_g));
    if (p) rhs.tail(p) = -r_p;
    Eigen::VectorXd step = msolve(rhs);
    const Eigen::VectorXd dx_aff = step.head(d);
    const Eigen::VectorXd ds_aff = -r_g - qp.G * dx_aff;
    const Eigen::VectorXd dl_aff =
        -lambda + dvec.cwiseProduct(r_g + qp.G * dx_aff);

    auto max_step = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double alpha = 1.0;
      for (int i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
      }
      return alpha;
    };
    const double a_aff = std::min(max_step(s, ds_aff), max_step(lambda, dl_aff));
    const double mu_aff = (s + a_aff * ds_aff).dot(lambda + a_aff * dl_aff) / q;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector with Mehrotra second-order term.
    const Eigen::VectorXd corr =
        (sigma * mu - (ds_aff.array() * dl_aff.array()).matrix().array()).matrix();
    rhs.head(d) = -r_d + qp.G.transpose() *
                             (lambda - dvec.cwiseProduct(r_g) - corr.cwiseQuotient(s));
    if (p) rhs.tail(p) = -r_p;
    step = msolve(rhs);
    const Eigen::VectorXd dx = step.head(d);
    const Eigen::VectorXd dnu = p ? step.tail(p).eval() : Eigen::VectorXd();
    const Eigen::VectorXd ds = -r_g - qp.G * dx;
    const Eigen::VectorXd dl =
        -lambda + dvec.cwiseProduct(r_g + qp.G * dx) + corr.cwiseQuotient(s);

    const double alpha = 0.99 * std::min(max_step(s, ds), max_step(lambda, dl));
    x += alpha * dx;
    if (p) nu += alpha * dnu;
    s += alpha * ds;
    lambda += alpha * dl;
  }

  QpSolution sol;
  if (converged) {
    sol.primal = x;
    sol.nu = nu;
    sol.lambda = lambda;
    sol.status = QpStatus::optimal;
  } else {
    sol = best;
    sol.status = QpStatus::max_iter;
  }
  sol.iterations = iter + 1;
  fill_residuals(qp, sol);
  if (!sol.primal.allFinite() || sol.eq_residual > 1e-6 * scale_b) {
    sol.status = QpStatus::infeasible;
  }
  return sol;
}

QpSolution solve_dense(const DenseQp& qp, const QpSolveOptions& opts) {
  return qp.G.rows() == 0 ? solve_equality(qp, opts) : solve_ipm(qp, opts);
}

bool blocks_usable(const QpProblem& pb) {
  if (pb.axis_blocks.empty()) return false;
  int cols = 0, eqs = 0, ineqs = 0;
  for (const AxisBlock& blk : pb.axis_blocks) {
    cols += blk.col_count;
    eqs += blk.eq_count;
    ineqs += blk.ineq_count;
  }
  return cols == pb.n_vars() && eqs == pb.n_eq() && ineqs == pb.n_ineq();
}

DenseQp extract_block(const QpProblem& pb, const AxisBlock& blk) {
  DenseQp qp;
  qp.Q = pb.Q.block(blk.col_begin, blk.col_begin, blk.col_count, blk.col_count);
  qp.A = pb.A.block(blk.eq_begin, blk.col_begin, blk.eq_count, blk.col_count);
  qp.b = pb.b.segment(blk.eq_begin, blk.eq_count);
  qp.G = pb.G.block(blk.ineq_begin, blk.col_begin, blk.ineq_count, blk.col_count);
  qp.h = pb.h.segment(blk.ineq_begin, blk.ineq_count);
  return qp;
}

// Transposed differentiated-KKT solve for one dense (sub)problem.
void backward_dense(const DenseQp& qp, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& nu, const Eigen::VectorXd& lambda,
                    double strict_margin, const Eigen::VectorXd& grad_c,
                    Eigen::VectorXd& u_x, Eigen::VectorXd& u_l,
                    Eigen::VectorXd& u_n, bool& degenerate) {
  const int d = static_cast<int>(qp.Q.rows());
  const int p = static_cast<int>(qp.A.rows());
  const int q = static_cast<int>(qp.G.rows());
  const int n = d + q + p;

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  K.topLeftCorner(d, d) = 2.0 * qp.Q;
  if (q) {
    K.block(0, d, d, q) = qp.G.transpose() * lambda.asDiagonal();
    K.block(d, 0, q, d) = qp.G;
    K.block(d, d, q, q) = (qp.G * x - qp.h).asDiagonal();
  }
  if (p) {
    K.block(0, d + q, d, p) = qp.A.transpose();
    K.block(d + q, 0, p, d) = qp.A;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs.head(d) = -grad_c;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd u = lu.solve(rhs);
  u += lu.solve(rhs - K * u);

  const double resid = inf_norm(K * u - rhs);
  const double scale = 1.0 + inf_norm(rhs) + K.cwiseAbs().maxCoeff() * inf_norm(u);
  degenerate = strict_margin <= 1e-7;
  if (!u.allFinite() || resid > 1e-7 * scale) {
    // Weak complementarity makes the system singular; fall back to the
    // least-squares solution and flag the gradient.
    u = K.colPivHouseholderQr().solve(rhs);
    degenerate = true;
    if (!u.allFinite()) {
      throw std::runtime_error("degenerate differentiated-KKT system has no usable solution");
    }
  }

  u_x = u.head(d);
  u_l = q ? u.segment(d, q).eval() : Eigen::VectorXd();
  u_n = p ? u.tail(p).eval() : Eigen::VectorXd();
}

}  // namespace

QpSolution solve(const QpProblem& problem, const QpSolveOptions& opts) {
  const int d = problem.n_vars();
  if (problem.A.rows() > 0 && problem.A.cols() != d)
    throw std::invalid_argument("A column count mismatch");
  if (problem.G.rows() > 0 && problem.G.cols() != d)
    throw std::invalid_argument("G column count mismatch");

  if (!(opts.use_blocks && blocks_usable(problem))) {
    DenseQp qp{problem.Q, problem.A, problem.b, problem.G, problem.h};
    return solve_dense(qp, opts);
  }

  QpSolution sol;
  sol.primal = Eigen::VectorXd::Zero(d);
  sol.nu = Eigen::VectorXd::Zero(problem.n_eq());
  sol.lambda = Eigen::VectorXd::Zero(problem.n_ineq());
  sol.status = QpStatus::optimal;
  sol.stationarity = sol.eq_residual = sol.ineq_residual = sol.comp_residual = 0.0;
  sol.objective = 0.0;
  for (const AxisBlock& blk : problem.axis_blocks) {
    const DenseQp qp = extract_block(problem, blk);
    const QpSolution bs = solve_dense(qp, opts);
    sol.primal.segment(blk.col_begin, blk.col_count) = bs.primal;
    sol.nu.segment(blk.eq_begin, blk.eq_count) = bs.nu;
    sol.lambda.segment(blk.ineq_begin, blk.ineq_count) = bs.lambda;
    sol.objective += bs.objective;
    sol.iterations = std::max(sol.iterations, bs.iterations);
    sol.stationarity = std::max(sol.stationarity, bs.stationarity);
    sol.eq_residual = std::max(sol.eq_residual, bs.eq_residual);
    sol.ineq_residual = std::max(sol.ineq_residual, bs.ineq_residual);
    sol.comp_residual = std::max(sol.comp_residual, bs.comp_residual);
    sol.strict_comp_margin = std::min(sol.strict_comp_margin, bs.strict_comp_margin);
    if (bs.status == QpStatus::infeasible) {
      sol.status = QpStatus::infeasible;
    } else if (bs.status == QpStatus::max_iter && sol.status == QpStatus::optimal) {
      sol.status = QpStatus::max_iter;
    }
  }
  return sol;
}

QpSolution solve(const QpProblem& problem, double tol, int max_iter) {
  QpSolveOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve(problem, opts);
}

SolveGradients backward(const QpProblem& problem, const QpSolution& solution,
                        const Eigen::VectorXd& grad_c) {
  if (solution.status != QpStatus::optimal)
    throw std::invalid_argument("backward requires an optimal solution");
  if (grad_c.size() != problem.n_vars())
    throw std::invalid_argument("grad_c size mismatch");

  SolveGradients g;
  g.grad_b = Eigen::VectorXd::Zero(problem.n_eq());
  g.grad_h = Eigen::VectorXd::Zero(problem.n_ineq());
  g.grad_Q = Eigen::MatrixXd::Zero(problem.n_vars(), problem.n_vars());
  g.grad_A = Eigen::MatrixXd::Zero(problem.n_eq(), problem.n_vars());
  g.grad_G = Eigen::MatrixXd::Zero(problem.n_ineq(), problem.n_vars());

  const bool use_blocks = blocks_usable(problem);
  std::vector<AxisBlock> blocks;
  if (use_blocks) {
    blocks = problem.axis_blocks;
  } else {
    AxisBlock whole;
    whole.col_count = problem.n_vars();
    whole.eq_count = problem.n_eq();
    whole.ineq_count = problem.n_ineq();
    blocks.push_back(whole);
  }

  for (const AxisBlock& blk : blocks) {
    const DenseQp qp = extract_block(problem, blk);
    const Eigen::VectorXd x = solution.primal.segment(blk.col_begin, blk.col_count);
    const Eigen::VectorXd nu = solution.nu.segment(blk.eq_begin, blk.eq_count);
    const Eigen::VectorXd lambda =
        solution.lambda.segment(blk.ineq_begin, blk.ineq_count);
    const Eigen::VectorXd gc = grad_c.segment(blk.col_begin, blk.col_count);

    Eigen::VectorXd u_x, u_l, u_n;
    bool degenerate = false;
    backward_dense(qp, x, nu, lambda, solution.strict_comp_margin, gc, u_x, u_l,
                   u_n, degenerate);
    g.degenerate = g.degenerate || degenerate;

    if (blk.eq_count) g.grad_b.segment(blk.eq_begin, blk.eq_count) = -u_n;
    if (blk.ineq_count)
      g.grad_h.segment(blk.ineq_begin, blk.ineq_count) = -lambda.cwiseProduct(u_l);
    g.grad_Q.block(blk.col_begin, blk.col_begin, blk.col_count, blk.col_count) =
        u_x * x.transpose() + x * u_x.transpose();
    if (blk.eq_count)
      g.grad_A.block(blk.eq_begin, blk.col_begin, blk.eq_count, blk.col_count) =
          nu * u_x.transpose() + u_n * x.transpose();
    if (blk.ineq_count)
      g.grad_G.block(blk.ineq_begin, blk.col_begin, blk.ineq_count, blk.col_count) =
          lambda * u_x.transpose() + lambda.cwiseProduct(u_l) * x.transpose();
  }
  return g;
}

}  // namespace snapopt
