#pragma once

#include <Eigen/Dense>

#include <functional>

namespace pil {

using LinearMap = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct KrylovResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Restarted GMRES with right preconditioning; x holds the initial guess on entry.
KrylovResult gmres(const LinearMap& op, const LinearMap& precond, const Eigen::VectorXd& rhs,
                   Eigen::VectorXd& x, double tol, int restart = 60, int max_iter = 800);

}  // namespace pil
