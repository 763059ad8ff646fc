#include "pil/krylov.hpp"

#include <cmath>
#include <vector>

namespace pil {

KrylovResult gmres(const LinearMap& op, const LinearMap& precond, const Eigen::VectorXd& rhs,
                   Eigen::VectorXd& x, double tol, int restart, int max_iter) {
  KrylovResult result;
  const Eigen::Index n = rhs.size();
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    x.setZero(n);
    result.converged = true;
    return result;
  }
  if (x.size() != n) x.setZero(n);

  Eigen::VectorXd r(n), w(n), z(n);
  std::vector<Eigen::VectorXd> basis;
  Eigen::MatrixXd hess;
  Eigen::VectorXd cs, sn, g;

  while (result.iterations < max_iter) {
    op(x, w);
    r = rhs - w;
    double beta = r.norm();
    result.relative_residual = beta / bnorm;
    if (result.relative_residual <= tol) {
      result.converged = true;
      return result;
    }
    basis.assign(1, r / beta);
    hess.setZero(restart + 1, restart);
    cs.setZero(restart);
    sn.setZero(restart);
    g.setZero(restart + 1);
    g[0] = beta;

    int k = 0;
    for (; k < restart && result.iterations < max_iter; ++k) {
      ++result.iterations;
      precond(basis[k], z);
      op(z, w);
      for (int i = 0; i <= k; ++i) {
        hess(i, k) = basis[i].dot(w);
        w -= hess(i, k) * basis[i];
      }
      // One reorthogonalisation pass keeps the basis clean at tight tolerances.
      for (int i = 0; i <= k; ++i) {
        const double corr = basis[i].dot(w);
        hess(i, k) += corr;
        w -= corr * basis[i];
      }
      hess(k + 1, k) = w.norm();
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * hess(i, k) + sn[i] * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double denom = std::hypot(hess(k, k), hess(k + 1, k));
      cs[k] = hess(k, k) / denom;
      sn[k] = hess(k + 1, k) / denom;
      const double hk1 = hess(k + 1, k);
      hess(k, k) = denom;
      hess(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      result.relative_residual = std::abs(g[k + 1]) / bnorm;
      if (hk1 > 0.0) basis.push_back(w / hk1);
      if (result.relative_residual <= tol || hk1 == 0.0) {
        ++k;
        break;
      }
    }
    Eigen::VectorXd y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    Eigen::VectorXd update = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) update += y[i] * basis[i];
    precond(update, z);
    x += z;
  }
  op(x, w);
  result.relative_residual = (rhs - w).norm() / bnorm;
  result.converged = result.relative_residual <= tol;
  return result;
}

}  // namespace pil
