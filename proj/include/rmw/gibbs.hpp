#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rmw/dataset.hpp"
#include "rmw/heterogeneity.hpp"
#include "rmw/model.hpp"

namespace rmw {

struct ChainState {
  Eigen::VectorXd beta;
  double gamma = 1.0;
  double theta = 0.0;  // unused for families without theta
  std::vector<double> lambdas;  // one per unit; all 1 for MixingFamily::None

  // Random-walk log step sizes, one per Metropolis block.
  std::vector<double> beta_log_scale;
  double gamma_log_scale = std::log(0.1);
  double theta_log_scale = std::log(0.5);
  std::vector<double> lambda_log_scale;

  std::size_t iteration = 0;
};

// Throws std::logic_error when the state leaves the parameter space.
void check_invariants(const ChainState& state, const ModelSpec& spec, const PriorBundle& priors);

// Full conditional log-kernels, each up to an additive constant.
//   beta_j : -gamma sum_i c_i x_i'beta - sum_i lambda_i (t_i e^{-x_i'beta})^gamma
//            (the same expression for every j)
//   gamma  : sum_i c_i [log gamma + (gamma-1) log t_i - gamma x_i'beta]
//            - sum_i lambda_i (t_i e^{-x_i'beta})^gamma + log pi(theta|gamma) + log pi(gamma)
//   theta  : sum_u log dP(lambda_u | theta) + log pi(theta|gamma)
//   lambda : d_u log lambda - lambda sum_{i in u} (t_i e^{-x_i'beta})^gamma + log dP(lambda|theta)
double log_full_conditional_beta_j(const ChainState& state, std::size_t j, const SurvivalDataset& data);
double log_full_conditional_gamma(const ChainState& state, const SurvivalDataset& data,
                                  const PriorBundle& priors);
double log_full_conditional_theta(const ChainState& state, const PriorBundle& priors);
double log_full_conditional_lambda(const ChainState& state, std::size_t unit,
                                   const SurvivalDataset& data, const UnitIndex& units,
                                   MixingFamily family);

struct AcceptanceRates {
  std::vector<double> beta;
  double gamma = 0.0;
  double theta = 0.0;
  double lambda = 0.0;  // averaged over Metropolis-updated units
};

struct PosteriorDraws {
  MixingFamily family = MixingFamily::None;
  std::vector<std::string> beta_names;
  bool gamma_free = true;
  std::vector<std::size_t> iterations;
  std::vector<ParameterPoint> draws;
  std::vector<std::vector<double>> lambda_draws;  // filled when RunPlan::keep_lambdas
  std::vector<double> per_draw_loglik;  // marginal log f(t | beta, gamma, theta)
  std::vector<std::vector<double>> unit_loglik;  // [draw][unit]
  AcceptanceRates acceptance;

  std::size_t size() const { return draws.size(); }
};

// Adaptive Metropolis-within-Gibbs sampler for the RMW-AFT model. Step sizes
// follow log s <- log s + m^{-0.6} (batch acceptance - target) after each
// adaptation window and are frozen once burn-in ends.
class GibbsSampler {
 public:
  GibbsSampler(const SurvivalDataset& data, ModelSpec spec, RunPlan plan);

  const ChainState& state() const { return state_; }
  void set_state(ChainState state);
  const PriorBundle& priors() const { return priors_; }
  const UnitIndex& units() const { return units_; }

  // One scan: each beta_j, gamma (if free), theta (if present), every lambda.
  void sweep();
  // The lambda block alone, visiting units in `order`.
  void update_lambdas(std::span<const std::size_t> order);

  PosteriorDraws run();

  void reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  void update_beta();
  void update_gamma();
  void update_theta();
  double lambda_exposure(std::size_t unit) const;
  void adapt();
  [[noreturn]] void fail(const std::string& what) const;

  const SurvivalDataset& data_;
  ModelSpec spec_;
  RunPlan plan_;
  PriorBundle priors_;
  UnitIndex units_;
  ChainState state_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};

  Eigen::VectorXd log_times_;
  Eigen::VectorXd eta_;
  double beta_kernel_ = 0.0;

  // Batch counters for adaptation.
  std::vector<std::size_t> beta_accept_;
  std::size_t gamma_accept_ = 0;
  std::size_t theta_accept_ = 0;
  std::vector<std::size_t> lambda_accept_;
  std::size_t batch_sweeps_ = 0;
  std::size_t batches_ = 0;

  // Post burn-in totals.
  std::vector<std::size_t> beta_total_;
  std::size_t gamma_total_ = 0;
  std::size_t theta_total_ = 0;
  std::size_t lambda_total_ = 0;
  std::size_t counted_sweeps_ = 0;
  bool adapting_ = true;
};

ChainState initial_state(const SurvivalDataset& data, const ModelSpec& spec, const PriorBundle& priors);

PosteriorDraws run(const SurvivalDataset& data, const ModelSpec& spec, const RunPlan& plan);

}  // namespace rmw
