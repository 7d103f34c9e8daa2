#include "rmw/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rmw {

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = safe_eval(f, probe);
    probe[i] = x[i] - h;
    const double down = safe_eval(f, probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd hs(n);
  for (Eigen::Index i = 0; i < n; ++i) hs[i] = step * std::max(1.0, std::abs(x[i]));
  const double f0 = safe_eval(f, x);
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = x[i] + hs[i];
    const double up = safe_eval(f, p);
    p[i] = x[i] - hs[i];
    const double down = safe_eval(f, p);
    p[i] = x[i];
    h(i, i) = (up - 2.0 * f0 + down) / (hs[i] * hs[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          p[i] = x[i] + si * hs[i];
          p[j] = x[j] + sj * hs[j];
          acc += si * sj * safe_eval(f, p);
        }
      }
      p[i] = x[i];
      p[j] = x[j];
      h(i, j) = h(j, i) = acc / (4.0 * hs[i] * hs[j]);
    }
  }
  return h;
}

OptimResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const OptimOptions& options) {
  const Eigen::Index n = x0.size();
  OptimResult r;
  r.x = std::move(x0);
  r.value = safe_eval(f, r.x);
  if (!std::isfinite(r.value)) return r;
  Eigen::VectorXd g = numeric_gradient(f, r.x);
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    r.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (r.gradient_norm < options.gradient_tolerance) {
      r.converged = true;
      return r;
    }
    Eigen::VectorXd dir = -inv_h * g;
    if (g.dot(dir) >= 0.0) {
      inv_h.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    double next = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    const double slope = g.dot(dir);
    for (int k = 0; k < 60; ++k) {
      x_new = r.x + step * dir;
      next = safe_eval(f, x_new);
      if (next <= r.value + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(next <= r.value + 1e-4 * step * slope)) {
      if (!fresh) {
        inv_h.setIdentity();
        fresh = true;
        continue;
      }
      r.converged = r.gradient_norm < 100.0 * options.gradient_tolerance;
      return r;
    }
    const Eigen::VectorXd g_new = numeric_gradient(f, x_new);
    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - g;
    const double rel = std::abs(next - r.value) / std::max(1.0, std::abs(r.value));
    r.x = x_new;
    r.value = next;
    g = g_new;
    fresh = false;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (r.iterations == 0) inv_h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      inv_h = left * inv_h * left.transpose() + rho * s * s.transpose();
    }
    r.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (rel < options.relative_tolerance && r.gradient_norm < 100.0 * options.gradient_tolerance) {
      r.converged = true;
      return r;
    }
  }
  r.gradient_norm = g.lpNorm<Eigen::Infinity>();
  r.converged = r.gradient_norm < options.gradient_tolerance;
  return r;
}

}  // namespace rmw
