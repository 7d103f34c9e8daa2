#include "rmw/frailty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>

#include "rmw/likelihood.hpp"

namespace rmw {

namespace {

constexpr double kZ975 = 1.959963984540054;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

struct Layout {
  Eigen::Index k = 0;
  bool gamma_free = false;
  bool theta = false;
  Eigen::Index dim() const { return k + (gamma_free ? 1 : 0) + (theta ? 1 : 0); }
};

ParameterPoint decode(const Layout& lay, const Eigen::VectorXd& u, std::optional<double> gamma_fixed) {
  ParameterPoint p;
  p.beta = u.head(lay.k);
  Eigen::Index at = lay.k;
  p.gamma = gamma_fixed.value_or(1.0);
  if (lay.gamma_free) p.gamma = std::exp(u[at++]);
  if (lay.theta) p.theta = std::exp(u[at]);
  return p;
}

double shift_for(MixingFamily family, LognormalConstraint c, double theta) {
  return family == MixingFamily::LogNormal && c == LognormalConstraint::EZ1 ? -0.5 * theta : 0.0;
}

// Newton-Raphson for the Weibull AFT model at a known shape.
MleFit newton_fixed_shape(const SurvivalDataset& data, double gamma) {
  const Eigen::MatrixXd& x = data.covariates;
  const Eigen::Index k = x.cols();
  const Eigen::ArrayXd log_t = data.times.array().log();
  Eigen::ArrayXd c(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) c[static_cast<Eigen::Index>(i)] = data.status[i];
  const double log_g = std::log(gamma);

  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::ArrayXd eta = (x * b).array();
    return (c * (log_g - gamma * eta + (gamma - 1.0) * log_t)).sum() - (gamma * (log_t - eta)).exp().sum();
  };

  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(log_t.matrix());
  double ll = loglik(beta);
  MleFit fit;
  fit.family = MixingFamily::None;
  Eigen::MatrixXd info(k, k);
  for (fit.iterations = 0; fit.iterations < 200; ++fit.iterations) {
    const Eigen::ArrayXd w = (gamma * (log_t - (x * beta).array())).exp();
    const Eigen::VectorXd grad = gamma * (x.transpose() * (w - c).matrix());
    info = gamma * gamma * (x.transpose() * w.matrix().asDiagonal() * x);
    const Eigen::VectorXd delta = info.ldlt().solve(grad);
    double step = 1.0;
    Eigen::VectorXd next = beta + delta;
    double ll_next = loglik(next);
    while (!(ll_next >= ll - 1e-12 * std::abs(ll)) && step > 1e-10) {
      step *= 0.5;
      next = beta + step * delta;
      ll_next = loglik(next);
    }
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    ll = ll_next;
    if (change <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, beta.lpNorm<Eigen::Infinity>())) {
      fit.converged = true;
      break;
    }
  }
  const Eigen::ArrayXd w = (gamma * (log_t - (x * beta).array())).exp();
  info = gamma * gamma * (x.transpose() * w.matrix().asDiagonal() * x);
  fit.estimates = beta;
  fit.loglik = ll;
  const Eigen::MatrixXd cov = info.inverse();
  fit.standard_errors = cov.diagonal().array().sqrt().matrix();
  return fit;
}

MleFit fit_impl(const SurvivalDataset& data, MixingFamily family, LognormalConstraint constraint,
                std::optional<double> theta_start, std::optional<double> gamma_fixed,
                const MleOptions& options) {
  validate(data);
  if (gamma_fixed && !(*gamma_fixed > 0.0)) throw std::invalid_argument("fit_aft_mle: gamma must be positive");
  std::vector<std::string> names = data.covariate_names;
  names.resize(data.num_covariates());
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j].empty()) names[j] = "beta" + std::to_string(j);
  }
  Layout lay{static_cast<Eigen::Index>(data.num_covariates()), !gamma_fixed.has_value(), has_theta(family)};
  if (lay.gamma_free) names.push_back("gamma");
  if (lay.theta) names.push_back("theta");

  MleFit fit;
  if (family == MixingFamily::None && gamma_fixed) {
    fit = newton_fixed_shape(data, *gamma_fixed);
  } else {
    const UnitIndex units(data);
    const Objective negll = [&](const Eigen::VectorXd& u) {
      const ParameterPoint p = decode(lay, u, gamma_fixed);
      if (!std::isfinite(p.gamma) || p.gamma <= 0.0) return std::numeric_limits<double>::infinity();
      if (lay.theta && !(p.theta > 0.0 && std::isfinite(p.theta))) return std::numeric_limits<double>::infinity();
      try {
        return -marginal_loglik(data, units, family, p, shift_for(family, constraint, p.theta));
      } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    // Start from the frailty-free fit at the same shape specification.
    Eigen::VectorXd start(lay.dim());
    {
      const bool free_weibull = family == MixingFamily::None;
      const MleFit base = gamma_fixed || free_weibull
                              ? newton_fixed_shape(data, gamma_fixed.value_or(1.0))
                              : fit_impl(data, MixingFamily::None, constraint, std::nullopt, std::nullopt,
                                         MleOptions{1, 0.0, options.seed, options.optim});
      start.head(lay.k) = base.estimates.head(lay.k);
      Eigen::Index at = lay.k;
      if (lay.gamma_free) start[at++] = free_weibull ? 0.0 : std::log(base.estimates[lay.k]);
      if (lay.theta) {
        const double def = family == MixingFamily::LogNormal ? 0.5 : 1.0;
        start[at] = std::log(theta_start.value_or(def));
      }
    }
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    OptimResult best;
    best.value = std::numeric_limits<double>::infinity();
    const std::size_t starts = std::max<std::size_t>(1, options.multistarts);
    for (std::size_t s = 0; s < starts; ++s) {
      Eigen::VectorXd u = start;
      if (s > 0) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += options.jitter * normal(rng);
      }
      OptimResult r = bfgs_minimize(negll, u, options.optim);
      const bool better = (r.converged && !best.converged) ||
                          (r.converged == best.converged && r.value < best.value);
      if (better) best = std::move(r);
    }
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    fit.loglik = -best.value;
    if (!best.converged) fit.warnings.push_back("optimizer did not converge");

    Eigen::VectorXd se_u = Eigen::VectorXd::Constant(lay.dim(), nan());
    const Eigen::MatrixXd hess = numeric_hessian(negll, best.x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (hess + hess.transpose()));
    if (hess.allFinite() && eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0) {
      se_u = hess.inverse().diagonal().array().sqrt().matrix();
    } else {
      fit.warnings.push_back("observed information is not positive definite");
    }
    const ParameterPoint p = decode(lay, best.x, gamma_fixed);
    fit.estimates = best.x;
    fit.standard_errors = se_u;
    fit.ci.resize(static_cast<std::size_t>(lay.dim()));
    for (Eigen::Index i = 0; i < lay.dim(); ++i) {
      const double lo = best.x[i] - kZ975 * se_u[i];
      const double hi = best.x[i] + kZ975 * se_u[i];
      if (i < lay.k) {
        fit.ci[static_cast<std::size_t>(i)] = {lo, hi};
      } else {
        fit.estimates[i] = std::exp(best.x[i]);
        fit.standard_errors[i] = fit.estimates[i] * se_u[i];
        fit.ci[static_cast<std::size_t>(i)] = {std::exp(lo), std::exp(hi)};
      }
    }
    if (lay.theta) {
      fit.frailty_variance = frailty_variance(family, p.theta, constraint);
      const Interval t_ci = fit.ci.back();
      if (std::isfinite(t_ci.lower) && std::isfinite(t_ci.upper)) {
        const double a = frailty_variance(family, t_ci.lower, constraint);
        const double b = frailty_variance(family, t_ci.upper, constraint);
        fit.frailty_variance_ci = Interval{std::min(a, b), std::max(a, b)};
      }
      if (*fit.frailty_variance < 1e-6) {
        fit.boundary = true;
        fit.warnings.push_back("frailty variance estimated at the boundary (near zero)");
      }
    }
    fit.family = family;
    fit.constraint = constraint;
    fit.names = std::move(names);
    return fit;
  }
  // Fixed-shape Weibull branch.
  fit.names = std::move(names);
  fit.ci.resize(fit.names.size());
  for (std::size_t i = 0; i < fit.ci.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    fit.ci[i] = {fit.estimates[r] - kZ975 * fit.standard_errors[r],
                 fit.estimates[r] + kZ975 * fit.standard_errors[r]};
  }
  if (!fit.converged) fit.warnings.push_back("Newton iteration did not converge");
  return fit;
}

}  // namespace

double frailty_variance(MixingFamily family, double theta, LognormalConstraint constraint) {
  switch (family) {
    case MixingFamily::None: return 0.0;
    case MixingFamily::ExponentialOne: return 1.0;
    case MixingFamily::Gamma: return 1.0 / theta;
    case MixingFamily::InverseGaussian: return theta * theta * theta;
    case MixingFamily::LogNormal: {
      const double mean_sq = constraint == LognormalConstraint::EZ1 ? 1.0 : std::exp(theta);
      return std::expm1(theta) * mean_sq;
    }
  }
  return nan();
}

MleFit fit_aft_mle(const SurvivalDataset& data, MixingFamily family, std::optional<double> gamma_fixed,
                   const MleOptions& options) {
  return fit_impl(data, family, LognormalConstraint::EW0, std::nullopt, gamma_fixed, options);
}

MleFit fit_aft_mle(const SurvivalDataset& data, const FrailtySpec& spec, std::optional<double> gamma_fixed,
                   const MleOptions& options) {
  if (!has_theta(spec.family)) throw std::invalid_argument("FrailtySpec needs a Gamma, IG or LogNormal family");
  if (!(spec.variance_param > 0.0)) throw std::invalid_argument("FrailtySpec: variance_param must be positive");
  return fit_impl(data, spec.family, spec.lognormal_constraint, spec.variance_param, gamma_fixed, options);
}

double survivor_frailty_mean_gamma(double sigma2, double cum_hazard) {
  if (!(sigma2 > 0.0) || !(cum_hazard >= 0.0)) throw std::domain_error("survivor_frailty_mean_gamma: bad argument");
  return 1.0 / (1.0 + sigma2 * cum_hazard);
}

double survivor_frailty_mean_ig(double sigma2, double cum_hazard) {
  if (!(sigma2 > 0.0) || !(cum_hazard >= 0.0)) throw std::domain_error("survivor_frailty_mean_ig: bad argument");
  return 1.0 / std::sqrt(1.0 + 2.0 * sigma2 * cum_hazard);
}

double survivor_frailty_density_gamma(double theta_val, double alpha_shape, double beta_rate,
                                      double cum_hazard) {
  if (!(alpha_shape > 0.0) || !(beta_rate > 0.0) || !(cum_hazard >= 0.0) || !(theta_val >= 0.0)) {
    throw std::domain_error("survivor_frailty_density_gamma: bad argument");
  }
  const boost::math::gamma_distribution<double> law(alpha_shape, 1.0 / (beta_rate + cum_hazard));
  return boost::math::pdf(law, theta_val);
}

double lognormal_frailty_loglik(const SurvivalDataset& data, const Eigen::VectorXd& beta, double gamma,
                                double variance, LognormalConstraint constraint,
                                std::size_t quadrature_nodes) {
  if (!(variance > 0.0)) throw std::domain_error("lognormal_frailty_loglik: variance must be positive");
  const UnitIndex units(data);
  const ParameterPoint p{beta, gamma, variance};
  return marginal_loglik(data, units, MixingFamily::LogNormal, p,
                         shift_for(MixingFamily::LogNormal, constraint, variance), quadrature_nodes);
}

}  // namespace rmw
