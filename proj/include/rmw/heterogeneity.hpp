#pragma once

#include "rmw/mixing.hpp"

namespace rmw {

// Coefficient of variation of Weibull(1, gamma) survival times:
// sqrt(Gamma(1+2/g) / Gamma(1+1/g)^2 - 1). Throws std::domain_error for
// gamma < 0.05 where the gamma-function ratio overflows.
double cv_weibull(double gamma);

// Smallest theta (exclusive) for which the survival-time cv is finite:
// 2/gamma for Gamma mixing, 0 otherwise.
double theta_lower_bound(MixingFamily family, double gamma);

// Squared cv of Lambda^{-1/gamma} given theta, and its derivative in theta
// (signed, so Gamma and inverse Gaussian are negative, LogNormal positive).
// None yields 0; ExponentialOne is the Gamma form at theta = 1.
double cv_star_squared(MixingFamily family, double gamma, double theta);
double cv_star_squared_derivative(MixingFamily family, double gamma, double theta);

// Survival-time cv of the mixture:
//   cv^2 = K [cv*]^2 + K - 1,  K = Gamma(1+2/g) / Gamma(1+1/g)^2.
double cv_total(MixingFamily family, double gamma, double theta);
// d cv / d theta = K / (2 cv) * d[cv*]^2/d theta. Above theta = 1e3 the
// Gamma and inverse-Gaussian branches switch to central differences on log cv.
double cv_total_derivative(MixingFamily family, double gamma, double theta);

// Heterogeneity inflation cv / cv^W; equals 1 without mixing.
double r_cv(MixingFamily family, double gamma, double theta);

// theta giving the requested survival-time cv at fixed gamma (cv is monotone
// in theta for each family). Throws std::domain_error if target <= cv^W.
double theta_for_cv(MixingFamily family, double gamma, double target_cv);

// pi*(cv): cv - cv^W(gamma) ~ Exponential with mean E(cv) - cv^W(gamma).
struct CvPrior {
  double expected_cv = 2.0;

  // -inf when cv <= cv^W(gamma) or E(cv) <= cv^W(gamma).
  double log_density(double cv, double gamma) const;
  // Median of pi*(cv) at this gamma.
  double median(double gamma) const;
};

// log pi(theta | gamma) = log pi*(cv(gamma, theta)) + log |d cv / d theta|.
// -inf outside the finite-cv support.
double induced_log_prior_theta(MixingFamily family, double gamma, double theta,
                               const CvPrior& cv_prior);

// Prior structure pi(beta, gamma, theta) proportional to pi(theta | gamma) pi(gamma)
// with beta flat. pi(gamma) is Exponential(1) truncated to gamma > gamma_min,
// where cv^W(gamma_min) = E(cv) for theta-bearing families (gamma_min = 0
// otherwise); it is normalised on its support.
class PriorBundle {
 public:
  PriorBundle(MixingFamily family, double expected_cv);

  double log_prior_theta_given_gamma(double theta, double gamma) const;
  double log_prior_gamma(double gamma) const;
  static constexpr bool beta_prior_is_flat() { return true; }

  MixingFamily family() const { return family_; }
  const CvPrior& cv_prior() const { return cv_prior_; }
  double gamma_lower_bound() const { return gamma_min_; }

 private:
  MixingFamily family_;
  CvPrior cv_prior_;
  double gamma_min_ = 0.0;
};

}  // namespace rmw
