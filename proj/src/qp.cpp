#include "extremodep/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace extremodep {

QpResult solve_qp_active_set(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                             const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain, const Eigen::VectorXd& bin,
                             const Eigen::VectorXd& x0, double tol, int max_iter) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index me = Aeq.rows();
  const Eigen::Index mi = Ain.rows();
  if ((me > 0 && (Aeq * x0 - beq).cwiseAbs().maxCoeff() > 1e-9) ||
      (mi > 0 && (Ain * x0 - bin).minCoeff() < -1e-9))
    throw std::invalid_argument("solve_qp_active_set: starting point is infeasible");

  Eigen::VectorXd x = x0;
  std::vector<Eigen::Index> work;  // active inequality rows
  QpResult res;
  Eigen::VectorXd lambda;

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const Eigen::Index m = me + static_cast<Eigen::Index>(work.size());
    Eigen::MatrixXd A(m, n);
    if (me > 0) A.topRows(me) = Aeq;
    for (std::size_t k = 0; k < work.size(); ++k) A.row(me + static_cast<Eigen::Index>(k)) = Ain.row(work[k]);

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = Q;
    K.topRightCorner(n, m) = -A.transpose();
    K.bottomLeftCorner(m, n) = A;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
    const Eigen::VectorXd g = Q * x - c;
    rhs.head(n) = -g;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    lambda = sol.tail(m);

    if (n == 0 || p.cwiseAbs().maxCoeff() < tol) {
      // stationary on the working set: check inequality multipliers
      Eigen::Index worst = -1;
      double most_neg = -tol;
      for (std::size_t k = 0; k < work.size(); ++k) {
        const double l = lambda(me + static_cast<Eigen::Index>(k));
        if (l < most_neg) {
          most_neg = l;
          worst = static_cast<Eigen::Index>(k);
        }
      }
      if (worst < 0) {
        res.x = x;
        res.kkt_residual = n == 0 ? 0.0 : (Q * x - c - A.transpose() * lambda).cwiseAbs().maxCoeff();
        return res;
      }
      work.erase(work.begin() + worst);
      continue;
    }

    // longest feasible step along p, lowest index wins ties
    double alpha = 1.0;
    Eigen::Index block = -1;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double ap = Ain.row(i).dot(p);
      if (ap >= -1e-14) continue;
      const double slack = std::min(0.0, bin(i) - Ain.row(i).dot(x));
      const double a = slack / ap;
      if (a < alpha) {
        alpha = a;
        block = i;
      }
    }
    x += alpha * p;
    if (block >= 0) work.push_back(block);
  }
  throw std::runtime_error("solve_qp_active_set: iteration limit reached");
}

}  // namespace extremodep
