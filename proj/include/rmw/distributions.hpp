#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmw/mixing.hpp"

namespace rmw {

// Rate mixture of Weibull distributions: T | Lambda = l ~ Weibull(alpha * l, gamma)
// with survival exp(-alpha * l * t^gamma). theta is ignored for families
// without a mixing parameter.
struct RmwParams {
  double alpha = 1.0;
  double gamma = 1.0;
  MixingFamily family = MixingFamily::None;
  double theta = 0.0;
};

// Throws std::domain_error on alpha <= 0, gamma <= 0 or theta outside support.
void validate(const RmwParams& params);

// log of shape * rate * t^{shape-1} * exp(-rate * t^shape).
double weibull_logpdf(double t, double rate, double shape);

// Rate mixture of exponentials (gamma == 1).
double rme_logpdf(double t, double alpha, MixingFamily family, double theta = 0.0);
double rme_logsurv(double t, double alpha, MixingFamily family, double theta = 0.0);

double rmw_logpdf(double t, const RmwParams& params);
double rmw_logsurv(double t, const RmwParams& params);
double rmw_loghazard(double t, const RmwParams& params);

// Two-stage draw: Lambda from the mixing law, then the conditional Weibull.
std::vector<double> sample_rmw(const RmwParams& params, std::size_t n, std::uint64_t seed);

// exp(-gamma * <x, beta>); throws std::invalid_argument on a length mismatch.
double aft_rate(std::span<const double> x, std::span<const double> beta, double gamma);

}  // namespace rmw
