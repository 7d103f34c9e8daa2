#pragma once

#include <span>
#include <vector>

#include "rmw/dataset.hpp"
#include "rmw/mixing.hpp"
#include "rmw/model.hpp"

namespace rmw {

// Marginal (rate-integrated) log-likelihood of each unit at (beta, gamma, theta):
//   sum_{i in u} c_i [log gamma + log alpha_i + (gamma-1) log t_i]
//     + log E[Lambda^{d_u} exp(-Lambda sum_{i in u} alpha_i t_i^gamma)]
// with alpha_i = exp(-gamma x_i' beta).
std::vector<double> unit_logliks(const SurvivalDataset& data, const UnitIndex& units,
                                 MixingFamily family, const ParameterPoint& point,
                                 double log_shift = 0.0, std::size_t quadrature_nodes = 64);

double marginal_loglik(const SurvivalDataset& data, const UnitIndex& units, MixingFamily family,
                       const ParameterPoint& point, double log_shift = 0.0,
                       std::size_t quadrature_nodes = 64);

// Log-likelihood conditional on the unit rates (no mixing integral).
double conditional_loglik(const SurvivalDataset& data, const ParameterPoint& point,
                          std::span<const double> unit_rates);

}  // namespace rmw
