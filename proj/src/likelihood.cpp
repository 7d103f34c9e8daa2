#include "rmw/likelihood.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rmw {

std::vector<double> unit_logliks(const SurvivalDataset& data, const UnitIndex& units,
                                 MixingFamily family, const ParameterPoint& point,
                                 double log_shift, std::size_t quadrature_nodes) {
  if (point.beta.size() != data.covariates.cols()) {
    throw std::invalid_argument("unit_logliks: beta has the wrong length");
  }
  const Eigen::VectorXd eta = data.covariates * point.beta;
  const double g = point.gamma;
  const double log_g = std::log(g);
  std::vector<double> out(units.records.size());
  for (std::size_t u = 0; u < units.records.size(); ++u) {
    double fixed = 0.0;
    double exposure = 0.0;
    for (auto i : units.records[u]) {
      const auto r = static_cast<Eigen::Index>(i);
      const double log_t = std::log(data.times[r]);
      const double log_alpha = -g * eta[r];
      if (data.status[i] == 1) fixed += log_g + log_alpha + (g - 1.0) * log_t;
      exposure += std::exp(log_alpha + g * log_t);
    }
    out[u] = fixed + log_laplace_moment(family, point.theta, units.events[u], exposure, log_shift,
                                        quadrature_nodes);
  }
  return out;
}

double marginal_loglik(const SurvivalDataset& data, const UnitIndex& units, MixingFamily family,
                       const ParameterPoint& point, double log_shift,
                       std::size_t quadrature_nodes) {
  const auto terms = unit_logliks(data, units, family, point, log_shift, quadrature_nodes);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

double conditional_loglik(const SurvivalDataset& data, const ParameterPoint& point,
                          std::span<const double> unit_rates) {
  if (unit_rates.size() != data.num_units()) {
    throw std::invalid_argument("conditional_loglik: one rate per unit required");
  }
  const Eigen::VectorXd eta = data.covariates * point.beta;
  const double g = point.gamma;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double rate = unit_rates[data.unit_of_record[i]] * std::exp(-g * eta[r]);
    const double log_t = std::log(data.times[r]);
    if (data.status[i] == 1) total += std::log(g) + std::log(rate) + (g - 1.0) * log_t;
    total -= rate * std::exp(g * log_t);
  }
  return total;
}

}  // namespace rmw
