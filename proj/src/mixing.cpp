#include "rmw/mixing.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rmw/special.hpp"

namespace rmw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double gamma_laplace(double theta, int events, double exposure) {
  // theta^theta Gamma(theta+d) / (Gamma(theta) (theta+A)^{theta+d})
  double out = -theta * std::log1p(exposure / theta);
  for (int j = 0; j < events; ++j) out += std::log1p((j - exposure) / (theta + exposure));
  return out;
}

double inverse_gaussian_laplace(double mean, int events, double exposure) {
  // int lambda^{d-3/2} exp(-a lambda - b / lambda) = 2 (b/a)^{p/2} K_p(2 sqrt(ab))
  // with p = d - 1/2, a = A + 1/(2 mean^2), b = 1/2.
  const double inv_mean = 1.0 / mean;
  const double a = exposure + 0.5 * inv_mean * inv_mean;
  const double z = std::sqrt(2.0 * a);
  const double shift = -2.0 * exposure / (inv_mean + z);  // 1/mean - z, cancellation-free
  if (events == 0) return shift;
  const double p = events - 0.5;
  const double log_k = log_bessel_k_half_integer(events - 1, z) + z;  // undo e^{-z}
  return shift - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(2.0) +
         0.5 * p * std::log(0.5 / a) + log_k;
}

double lognormal_laplace(double variance, int events, double exposure, double log_shift,
                         std::size_t nodes) {
  // Lambda = exp(log_shift + sd * x), x ~ N(0, 1).
  const double sd = std::sqrt(variance);
  const double d = events;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) + d * log_shift;
  if (exposure == 0.0) {
    // E[Lambda^d] in closed form.
    return d * log_shift + 0.5 * d * d * variance;
  }
  if (std::isinf(exposure)) return -std::numeric_limits<double>::infinity();
  const double log_rate = std::log(exposure) + log_shift;
  ConcaveLogIntegrand g;
  g.value = [=](double x) { return log_norm + d * sd * x - std::exp(log_rate + sd * x) - 0.5 * x * x; };
  g.first = [=](double x) { return d * sd - sd * std::exp(log_rate + sd * x) - x; };
  g.second = [=](double x) { return -sd * sd * std::exp(log_rate + sd * x) - 1.0; };
  return log_integrate_concave(g, nodes);
}

}  // namespace

std::string_view to_string(MixingFamily family) {
  switch (family) {
    case MixingFamily::None: return "none";
    case MixingFamily::ExponentialOne: return "exponential1";
    case MixingFamily::Gamma: return "gamma";
    case MixingFamily::InverseGaussian: return "inverse_gaussian";
    case MixingFamily::LogNormal: return "lognormal";
  }
  return "unknown";
}

MixingFamily parse_mixing_family(std::string_view name) {
  if (name == "none" || name == "weibull" || name == "exponential") return MixingFamily::None;
  if (name == "exponential1" || name == "exp1") return MixingFamily::ExponentialOne;
  if (name == "gamma" || name == "gam") return MixingFamily::Gamma;
  if (name == "inverse_gaussian" || name == "ig") return MixingFamily::InverseGaussian;
  if (name == "lognormal" || name == "ln") return MixingFamily::LogNormal;
  throw std::invalid_argument("unknown mixing family '" + std::string(name) + "'");
}

void check_theta(MixingFamily family, double theta) {
  if (has_theta(family) && !(theta > 0.0 && std::isfinite(theta))) {
    throw std::domain_error(std::string(to_string(family)) + " mixing requires theta > 0, got " +
                            std::to_string(theta));
  }
}

double log_mixing_density(MixingFamily family, double lambda, double theta) {
  if (!(lambda > 0.0)) return kNegInf;
  switch (family) {
    case MixingFamily::None: return lambda == 1.0 ? 0.0 : kNegInf;
    case MixingFamily::ExponentialOne: return -lambda;
    case MixingFamily::Gamma:
      return theta * std::log(theta) - std::lgamma(theta) + (theta - 1.0) * std::log(lambda) -
             theta * lambda;
    case MixingFamily::InverseGaussian: {
      const double dev = lambda - theta;
      return -0.5 * std::log(2.0 * std::numbers::pi) - 1.5 * std::log(lambda) -
             dev * dev / (2.0 * theta * theta * lambda);
    }
    case MixingFamily::LogNormal: {
      const double l = std::log(lambda);
      return -l - 0.5 * std::log(2.0 * std::numbers::pi * theta) - l * l / (2.0 * theta);
    }
  }
  return kNegInf;
}

double mixing_mean(MixingFamily family, double theta) {
  switch (family) {
    case MixingFamily::None:
    case MixingFamily::ExponentialOne:
    case MixingFamily::Gamma: return 1.0;
    case MixingFamily::InverseGaussian: return theta;
    case MixingFamily::LogNormal: return std::exp(0.5 * theta);
  }
  return 1.0;
}

double sample_mixing(MixingFamily family, double theta, std::mt19937_64& rng) {
  switch (family) {
    case MixingFamily::None: return 1.0;
    case MixingFamily::ExponentialOne: return std::exponential_distribution<double>(1.0)(rng);
    case MixingFamily::Gamma: return std::gamma_distribution<double>(theta, 1.0 / theta)(rng);
    case MixingFamily::InverseGaussian: {
      // Michael, Schucany and Haas transformation with shape 1.
      const double mu = theta;
      const double nu = std::normal_distribution<double>(0.0, 1.0)(rng);
      const double y = nu * nu;
      const double x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + mu * mu * y * y);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      return u <= mu / (mu + x) ? x : mu * mu / x;
    }
    case MixingFamily::LogNormal:
      return std::exp(std::normal_distribution<double>(0.0, std::sqrt(theta))(rng));
  }
  return 1.0;
}

double log_laplace_moment(MixingFamily family, double theta, int events, double exposure,
                          double log_shift, std::size_t quadrature_nodes) {
  if (events < 0 || !(exposure >= 0.0)) {
    throw std::domain_error("log_laplace_moment: need events >= 0 and exposure >= 0");
  }
  check_theta(family, theta);
  switch (family) {
    case MixingFamily::None: return -exposure;
    case MixingFamily::ExponentialOne: return gamma_laplace(1.0, events, exposure);
    case MixingFamily::Gamma: return gamma_laplace(theta, events, exposure);
    case MixingFamily::InverseGaussian: return inverse_gaussian_laplace(theta, events, exposure);
    case MixingFamily::LogNormal:
      return lognormal_laplace(theta, events, exposure, log_shift, quadrature_nodes);
  }
  return kNegInf;
}

}  // namespace rmw
