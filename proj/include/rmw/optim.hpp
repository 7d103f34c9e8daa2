#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

namespace rmw {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  std::size_t max_iterations = 500;
  double gradient_tolerance = 1e-6;   // max-norm
  double relative_tolerance = 1e-10;  // on the objective
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

// Central-difference gradient and Hessian with steps scaled by max(1, |x_i|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double step = 1e-5);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double step = 1e-4);

// Minimises f by BFGS with a backtracking Armijo line search and numeric
// gradients. Non-finite objective values are treated as +inf. Converged when
// the gradient max-norm drops below the tolerance, or when the relative
// change of f stays below relative_tolerance while the gradient is within
// 100x of its tolerance (the numeric-gradient noise floor).
OptimResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options = {});

}  // namespace rmw
