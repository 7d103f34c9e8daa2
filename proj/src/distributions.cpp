#include "rmw/distributions.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace rmw {

namespace {

void require_positive_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::domain_error("survival time must be positive and finite, got " + std::to_string(t));
  }
}

}  // namespace

void validate(const RmwParams& params) {
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) {
    throw std::domain_error("RMW alpha must be positive, got " + std::to_string(params.alpha));
  }
  if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) {
    throw std::domain_error("RMW gamma must be positive, got " + std::to_string(params.gamma));
  }
  check_theta(params.family, params.theta);
}

double weibull_logpdf(double t, double rate, double shape) {
  require_positive_time(t);
  if (!(rate > 0.0) || !(shape > 0.0)) {
    throw std::domain_error("weibull_logpdf: rate and shape must be positive");
  }
  const double log_t = std::log(t);
  return std::log(shape) + std::log(rate) + (shape - 1.0) * log_t - rate * std::exp(shape * log_t);
}

double rme_logpdf(double t, double alpha, MixingFamily family, double theta) {
  return rmw_logpdf(t, RmwParams{alpha, 1.0, family, theta});
}

double rme_logsurv(double t, double alpha, MixingFamily family, double theta) {
  return rmw_logsurv(t, RmwParams{alpha, 1.0, family, theta});
}

// Power map: S_RMW(t) = S_RME(t^gamma), f_RMW(t) = gamma t^{gamma-1} f_RME(t^gamma).
double rmw_logpdf(double t, const RmwParams& p) {
  require_positive_time(t);
  validate(p);
  const double log_t = std::log(t);
  const double u = std::exp(p.gamma * log_t);
  return std::log(p.gamma) + (p.gamma - 1.0) * log_t + std::log(p.alpha) +
         log_laplace_moment(p.family, p.theta, 1, p.alpha * u);
}

double rmw_logsurv(double t, const RmwParams& p) {
  require_positive_time(t);
  validate(p);
  return log_laplace_moment(p.family, p.theta, 0, p.alpha * std::pow(t, p.gamma));
}

double rmw_loghazard(double t, const RmwParams& p) { return rmw_logpdf(t, p) - rmw_logsurv(t, p); }

std::vector<double> sample_rmw(const RmwParams& params, std::size_t n, std::uint64_t seed) {
  validate(params);
  if (n == 0) throw std::invalid_argument("sample_rmw: n must be at least 1");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> unit_exp(1.0);
  std::vector<double> out(n);
  for (auto& t : out) {
    const double lambda = sample_mixing(params.family, params.theta, rng);
    t = std::pow(unit_exp(rng) / (params.alpha * lambda), 1.0 / params.gamma);
  }
  return out;
}

double aft_rate(std::span<const double> x, std::span<const double> beta, double gamma) {
  if (x.size() != beta.size()) {
    throw std::invalid_argument("aft_rate: covariate vector has length " + std::to_string(x.size()) +
                                " but beta has length " + std::to_string(beta.size()));
  }
  return std::exp(-gamma * std::inner_product(x.begin(), x.end(), beta.begin(), 0.0));
}

}  // namespace rmw
