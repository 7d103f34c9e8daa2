#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmw/assessment.hpp"
#include "rmw/dataset.hpp"
#include "rmw/mixing.hpp"
#include "rmw/optim.hpp"

namespace rmw {

// Which normalisation pins the log-normal frailty Z = e^W.
//   EW0: E(W) = 0, Z = e^W with W ~ Normal(0, variance)
//   EZ1: E(Z) = 1, W ~ Normal(-variance/2, variance)
enum class LognormalConstraint { EW0, EZ1 };

struct FrailtySpec {
  MixingFamily family = MixingFamily::Gamma;  // Gamma, InverseGaussian or LogNormal
  double variance_param = 1.0;  // starting theta (Gamma, IG) or variance of W (LogNormal)
  LognormalConstraint lognormal_constraint = LognormalConstraint::EW0;
};

struct MleOptions {
  std::size_t multistarts = 5;  // the first start is unjittered
  double jitter = 0.3;
  std::uint64_t seed = 12345;
  OptimOptions optim;
};

struct MleFit {
  MixingFamily family = MixingFamily::None;
  LognormalConstraint constraint = LognormalConstraint::EW0;
  std::vector<std::string> names;  // beta names, then "gamma" if free, "theta" if present
  Eigen::VectorXd estimates;
  Eigen::VectorXd standard_errors;  // NaN when the observed information is not positive definite
  std::vector<Interval> ci;  // Wald 95%; gamma and theta on the log scale
  double loglik = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  bool boundary = false;  // frailty variance estimated at the edge of its space
  std::optional<double> frailty_variance;  // Var(Lambda) at the estimate
  std::optional<Interval> frailty_variance_ci;
  std::vector<std::string> warnings;
};

// Maximum marginal-likelihood AFT fit. Family None with a fixed gamma is
// solved by Newton's method with analytic derivatives; everything else by
// multistart BFGS on (beta, log gamma, log theta).
MleFit fit_aft_mle(const SurvivalDataset& data, MixingFamily family,
                   std::optional<double> gamma_fixed = std::nullopt, const MleOptions& options = {});
MleFit fit_aft_mle(const SurvivalDataset& data, const FrailtySpec& spec,
                   std::optional<double> gamma_fixed = std::nullopt, const MleOptions& options = {});

// Var(Lambda) for the mixing law at theta.
double frailty_variance(MixingFamily family, double theta,
                        LognormalConstraint constraint = LognormalConstraint::EW0);

// Mean frailty among survivors to t for gamma frailty with variance sigma2:
// 1 / (1 + sigma2 * Lambda0(t)).
double survivor_frailty_mean_gamma(double sigma2, double cum_hazard);
// Inverse-Gaussian frailty: 1 / sqrt(1 + 2 sigma2 Lambda0(t)).
double survivor_frailty_mean_ig(double sigma2, double cum_hazard);
// Density at theta_val of the survivors' frailty, Gamma(alpha, beta + Lambda0(t)).
double survivor_frailty_density_gamma(double theta_val, double alpha_shape, double beta_rate,
                                      double cum_hazard);

// Marginal log-likelihood with log-normal frailty integrated by Gauss-Hermite.
double lognormal_frailty_loglik(const SurvivalDataset& data, const Eigen::VectorXd& beta,
                                double gamma, double variance, LognormalConstraint constraint,
                                std::size_t quadrature_nodes = 64);

}  // namespace rmw
