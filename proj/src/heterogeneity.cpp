#include "rmw/heterogeneity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

namespace rmw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDerivativeSwitch = 1e3;

// log Gamma(1+2/g) - 2 log Gamma(1+1/g)
double log_weibull_moment_ratio(double gamma) {
  if (!(gamma >= 0.05) || !std::isfinite(gamma)) {
    throw std::domain_error("cv_weibull: gamma-function ratio overflows for gamma < 0.05 (gamma = " +
                            std::to_string(gamma) + ")");
  }
  return std::lgamma(1.0 + 2.0 / gamma) - 2.0 * std::lgamma(1.0 + 1.0 / gamma);
}

// log[Gamma(theta) Gamma(theta + 2s) / Gamma(theta + s)^2] for shift s with
// theta + 2s > 0, using ratio routines that stay accurate at large theta.
double log_gamma_curvature_ratio(double theta, double s) {
  // Gamma(theta)/Gamma(theta+s) and Gamma(theta+2s)/Gamma(theta+s)
  const double lo = std::min(theta, theta + 2.0 * s);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  const double a = std::log(boost::math::tgamma_delta_ratio(theta, s));
  const double b = -std::log(boost::math::tgamma_delta_ratio(theta + s, s));
  return a + b;
}

double digamma_curvature(double theta, double s) {
  using boost::math::digamma;
  return digamma(theta) + digamma(theta + 2.0 * s) - 2.0 * digamma(theta + s);
}

void require_theta_family(MixingFamily family, const char* where) {
  if (!has_theta(family) && family != MixingFamily::ExponentialOne && family != MixingFamily::None) {
    throw std::invalid_argument(std::string(where) + ": unsupported family");
  }
}

double cv_from_star(double log_k, double star_sq) {
  const double k = std::exp(log_k);
  return std::sqrt(k * star_sq + k - 1.0);
}

}  // namespace

double cv_weibull(double gamma) { return std::sqrt(std::expm1(log_weibull_moment_ratio(gamma))); }

double theta_lower_bound(MixingFamily family, double gamma) {
  return family == MixingFamily::Gamma ? 2.0 / gamma : 0.0;
}

double cv_star_squared(MixingFamily family, double gamma, double theta) {
  require_theta_family(family, "cv_star_squared");
  if (!(gamma > 0.0)) throw std::domain_error("cv_star_squared: gamma must be positive");
  const double s = 1.0 / gamma;
  switch (family) {
    case MixingFamily::None: return 0.0;
    case MixingFamily::ExponentialOne:
      if (!(1.0 > 2.0 * s)) {
        throw std::domain_error("cv_star_squared: Exponential(1) mixing has infinite cv for gamma <= 2");
      }
      return std::expm1(log_gamma_curvature_ratio(1.0, -s));
    case MixingFamily::Gamma:
      if (!(theta > 2.0 * s)) {
        throw std::domain_error("cv_star_squared: Gamma mixing needs theta > 2/gamma (theta = " +
                                std::to_string(theta) + ", gamma = " + std::to_string(gamma) + ")");
      }
      return std::expm1(log_gamma_curvature_ratio(theta, -s));
    case MixingFamily::InverseGaussian:
      check_theta(family, theta);
      return std::expm1(log_gamma_curvature_ratio(theta, s));
    case MixingFamily::LogNormal:
      check_theta(family, theta);
      return std::expm1(theta * s * s);
  }
  return 0.0;
}

double cv_star_squared_derivative(MixingFamily family, double gamma, double theta) {
  const double s = 1.0 / gamma;
  switch (family) {
    case MixingFamily::None:
    case MixingFamily::ExponentialOne: return 0.0;
    case MixingFamily::Gamma:
      return (cv_star_squared(family, gamma, theta) + 1.0) * digamma_curvature(theta, -s);
    case MixingFamily::InverseGaussian:
      return (cv_star_squared(family, gamma, theta) + 1.0) * digamma_curvature(theta, s);
    case MixingFamily::LogNormal:
      check_theta(family, theta);
      return s * s * std::exp(theta * s * s);
  }
  return 0.0;
}

double cv_total(MixingFamily family, double gamma, double theta) {
  const double log_k = log_weibull_moment_ratio(gamma);
  return cv_from_star(log_k, cv_star_squared(family, gamma, theta));
}

double cv_total_derivative(MixingFamily family, double gamma, double theta) {
  if (!has_theta(family)) return 0.0;
  const double log_k = log_weibull_moment_ratio(gamma);
  if (family != MixingFamily::LogNormal && theta > kDerivativeSwitch) {
    // Digamma second differences cancel here; differentiate log cv instead.
    const double h = 1e-4 * theta;
    const double up = std::log(cv_total(family, gamma, theta + h));
    const double down = std::log(cv_total(family, gamma, theta - h));
    return cv_total(family, gamma, theta) * (up - down) / (2.0 * h);
  }
  const double cv = cv_total(family, gamma, theta);
  const double d = std::exp(log_k) / (2.0 * cv) * cv_star_squared_derivative(family, gamma, theta);
  if (!std::isfinite(d)) {
    throw std::overflow_error("cv_total_derivative: non-finite derivative at theta = " +
                              std::to_string(theta) + ", gamma = " + std::to_string(gamma));
  }
  return d;
}

double r_cv(MixingFamily family, double gamma, double theta) {
  if (family == MixingFamily::None) return 1.0;
  return cv_total(family, gamma, theta) / cv_weibull(gamma);
}

double theta_for_cv(MixingFamily family, double gamma, double target_cv) {
  if (!has_theta(family)) throw std::invalid_argument("theta_for_cv: family has no theta");
  const double floor_cv = cv_weibull(gamma);
  if (!(target_cv > floor_cv)) {
    throw std::domain_error("theta_for_cv: target cv " + std::to_string(target_cv) +
                            " is not above the Weibull bound " + std::to_string(floor_cv));
  }
  const double lb = theta_lower_bound(family, gamma);
  // cv is monotone in u = log(theta - lb); root of cv(u) - target.
  auto excess = [&](double u) {
    const double value = cv_total(family, gamma, lb + std::exp(u));
    return std::isfinite(value) ? value - target_cv : std::numeric_limits<double>::max();
  };
  double lo = -1.0;
  double hi = 1.0;
  const bool increasing = family == MixingFamily::LogNormal;
  auto sign_at = [&](double u) { return increasing ? excess(u) : -excess(u); };
  for (int i = 0; i < 100 && sign_at(lo) > 0.0; ++i) lo -= 2.0;
  for (int i = 0; i < 100 && sign_at(hi) < 0.0; ++i) hi += 2.0;
  if (!(sign_at(lo) <= 0.0 && sign_at(hi) >= 0.0)) {
    throw std::domain_error("theta_for_cv: could not bracket target cv " + std::to_string(target_cv));
  }
  auto [a, b] = boost::math::tools::bisect(sign_at, lo, hi, boost::math::tools::eps_tolerance<double>(52));
  return lb + std::exp(0.5 * (a + b));
}

double CvPrior::log_density(double cv, double gamma) const {
  const double floor_cv = cv_weibull(gamma);
  const double mean_excess = expected_cv - floor_cv;
  if (!(mean_excess > 0.0) || !(cv > floor_cv) || !std::isfinite(cv)) return kNegInf;
  return -std::log(mean_excess) - (cv - floor_cv) / mean_excess;
}

double CvPrior::median(double gamma) const {
  const double floor_cv = cv_weibull(gamma);
  return floor_cv + (expected_cv - floor_cv) * std::log(2.0);
}

double induced_log_prior_theta(MixingFamily family, double gamma, double theta,
                               const CvPrior& cv_prior) {
  if (!has_theta(family)) throw std::invalid_argument("induced_log_prior_theta: family has no theta");
  if (!(theta > theta_lower_bound(family, gamma)) || !std::isfinite(theta)) return kNegInf;
  const double cv = cv_total(family, gamma, theta);
  const double log_pi = cv_prior.log_density(cv, gamma);
  if (log_pi == kNegInf) return kNegInf;
  const double jac = std::abs(cv_total_derivative(family, gamma, theta));
  if (!(jac > 0.0)) return kNegInf;
  return log_pi + std::log(jac);
}

PriorBundle::PriorBundle(MixingFamily family, double expected_cv)
    : family_(family), cv_prior_{expected_cv} {
  if (!has_theta(family)) return;
  if (!(expected_cv > 0.0)) throw std::invalid_argument("PriorBundle: E(cv) must be positive");
  // cv^W is decreasing in gamma; find gamma_min with cv^W(gamma_min) = E(cv).
  if (!(expected_cv > cv_weibull(50.0))) {
    throw std::invalid_argument("PriorBundle: E(cv) = " + std::to_string(expected_cv) +
                                " is below the Weibull cv for every plausible gamma");
  }
  auto f = [&](double g) { return cv_weibull(g) - expected_cv; };
  double lo = 0.05;
  if (f(lo) <= 0.0) {
    gamma_min_ = lo;
    return;
  }
  auto [a, b] = boost::math::tools::bisect(f, lo, 50.0, boost::math::tools::eps_tolerance<double>(50));
  gamma_min_ = 0.5 * (a + b);
}

double PriorBundle::log_prior_theta_given_gamma(double theta, double gamma) const {
  if (!has_theta(family_)) return 0.0;
  if (!(gamma > gamma_min_)) return kNegInf;
  return induced_log_prior_theta(family_, gamma, theta, cv_prior_);
}

double PriorBundle::log_prior_gamma(double gamma) const {
  if (!(gamma > gamma_min_) || !std::isfinite(gamma)) return kNegInf;
  return -(gamma - gamma_min_);
}

}  // namespace rmw
