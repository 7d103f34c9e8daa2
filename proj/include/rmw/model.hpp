#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "rmw/mixing.hpp"

namespace rmw {

// One Bayesian model cell: mixing family, shape fixed or free, and the
// elicited prior mean of the survival-time coefficient of variation.
struct ModelSpec {
  std::string label;
  MixingFamily family = MixingFamily::None;
  std::optional<double> gamma_fixed;
  double expected_cv = 2.0;
};

struct RunPlan {
  std::size_t total_iterations = 600000;
  double burn_in_fraction = 0.25;
  std::size_t thin = 50;
  double target_acceptance = 0.44;
  std::uint64_t seed = 20170101;
  std::size_t adaptation_window = 50;
  bool keep_lambdas = false;

  // 600,000 iterations, 25% burn-in, thinned to 9,000 retained draws.
  static RunPlan paper_scale();
  // 100,000 iterations, 25% burn-in, thin 10.
  static RunPlan desk();

  std::size_t burn_in() const;
  std::size_t retained() const;
  // Throws std::invalid_argument on an unusable plan.
  void validate() const;
};

// A point (beta, gamma, theta) of the marginal model.
struct ParameterPoint {
  Eigen::VectorXd beta;
  double gamma = 1.0;
  double theta = 0.0;
};

}  // namespace rmw
