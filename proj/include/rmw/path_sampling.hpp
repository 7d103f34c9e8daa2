#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rmw/dataset.hpp"
#include "rmw/model.hpp"

namespace rmw {

struct PathSamplingPlan {
  std::size_t temperatures = 20;
  double spacing_exponent = 4.0;  // t_j = (j / (J-1))^exponent
  std::size_t burn_in = 1000;     // per temperature, with proposal adaptation
  std::size_t samples = 3000;     // per temperature
  std::uint64_t seed = 7;
};

struct PathSamplingResult {
  double log_bf = 0.0;  // log m(target) - log m(reference)
  double mc_se = 0.0;
  std::vector<double> temperatures;
  std::vector<double> mean_log_ratio;
  std::vector<double> se_log_ratio;
};

// Log Bayes factor of `target` against a reference model without free
// parameters beyond beta (family None, fixed gamma), estimated by thermodynamic
// integration along the model-switch path
//   q_t proportional to L_ref(beta)^{1-t} L_target(beta, gamma, theta)^t pi(gamma) pi(theta | gamma).
// The flat beta prior is shared and cancels. Each temperature runs an adaptive
// random-walk Metropolis chain on (beta, log gamma, log(theta - bound)) with
// the marginal likelihoods; temperatures are visited from t = 1 down to 0.
PathSamplingResult model_switch_log_bf(const SurvivalDataset& data, const ModelSpec& reference,
                                       const ModelSpec& target, const PathSamplingPlan& plan,
                                       std::optional<ParameterPoint> start = std::nullopt);

}  // namespace rmw
