#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace rmw {

// Law of the subject-level rate multiplier Lambda.
//   None            Lambda == 1 (plain Weibull / exponential)
//   ExponentialOne  Exponential(1)
//   Gamma           Gamma(theta, theta), mean 1
//   InverseGaussian inverse Gaussian with mean theta and shape 1
//   LogNormal       log Lambda ~ Normal(0, theta), mean e^{theta/2}
enum class MixingFamily { None, ExponentialOne, Gamma, InverseGaussian, LogNormal };

std::string_view to_string(MixingFamily family);
// Accepts the names produced by to_string plus short aliases
// ("weibull", "exp1", "gam", "ig", "ln"); throws std::invalid_argument.
MixingFamily parse_mixing_family(std::string_view name);

constexpr bool has_theta(MixingFamily family) {
  return family == MixingFamily::Gamma || family == MixingFamily::InverseGaussian ||
         family == MixingFamily::LogNormal;
}

constexpr bool has_lambda(MixingFamily family) { return family != MixingFamily::None; }

// Throws std::domain_error unless theta lies in the family's parameter space
// (theta > 0 for every theta-bearing family; ignored otherwise).
void check_theta(MixingFamily family, double theta);

// log dP(lambda | theta); -inf outside the support.
double log_mixing_density(MixingFamily family, double lambda, double theta);

// E(Lambda | theta).
double mixing_mean(MixingFamily family, double theta);

double sample_mixing(MixingFamily family, double theta, std::mt19937_64& rng);

// log E[ Lambda^events * exp(-Lambda * exposure) ] under the mixing law.
// This single quantity yields every marginal (lambda-integrated) density and
// survival term: events = 0 gives the survival factor, events = 1 the density
// factor, and larger counts arise for shared rates over several records.
// LogNormal is integrated numerically; `log_shift` adds a constant to
// log Lambda (used for the E[Lambda] = 1 lognormal variant).
double log_laplace_moment(MixingFamily family, double theta, int events, double exposure,
                          double log_shift = 0.0, std::size_t quadrature_nodes = 64);

}  // namespace rmw
