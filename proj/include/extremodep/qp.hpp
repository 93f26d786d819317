#pragma once

#include <Eigen/Dense>

namespace extremodep {

struct QpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double kkt_residual = 0.0;
};

// Primal active-set solver for
//   min 0.5 x'Qx - c'x  s.t.  Aeq x = beq,  Ain x >= bin,
// started from a feasible x0. Q must be positive definite on the null space of
// the working constraints.
QpResult solve_qp_active_set(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                             const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain, const Eigen::VectorXd& bin,
                             const Eigen::VectorXd& x0, double tol = 1e-10, int max_iter = 20000);

}  // namespace extremodep
