#include "rmw/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rmw/likelihood.hpp"
#include "rmw/special.hpp"

namespace rmw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double beta_kernel(const SurvivalDataset& data, const Eigen::VectorXd& log_times,
                   const Eigen::VectorXd& eta, double gamma, const std::vector<double>& lambdas) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (data.status[iu] == 1) out -= gamma * eta[i];
    out -= lambdas[data.unit_of_record[iu]] * std::exp(gamma * (log_times[i] - eta[i]));
  }
  return out;
}

double gamma_kernel(const SurvivalDataset& data, const Eigen::VectorXd& log_times,
                    const Eigen::VectorXd& eta, double gamma, double theta,
                    const std::vector<double>& lambdas, const PriorBundle& priors) {
  const double prior = priors.log_prior_gamma(gamma) + priors.log_prior_theta_given_gamma(theta, gamma);
  if (prior == kNegInf) return kNegInf;
  const double log_g = std::log(gamma);
  double out = prior;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (data.status[iu] == 1) out += log_g + (gamma - 1.0) * log_times[i] - gamma * eta[i];
    out -= lambdas[data.unit_of_record[iu]] * std::exp(gamma * (log_times[i] - eta[i]));
  }
  return out;
}

double theta_kernel(const std::vector<double>& lambdas, double theta, double gamma,
                    const PriorBundle& priors) {
  double out = priors.log_prior_theta_given_gamma(theta, gamma);
  if (out == kNegInf) return kNegInf;
  for (double l : lambdas) out += log_mixing_density(priors.family(), l, theta);
  return out;
}

double lambda_kernel(double lambda, int events, double exposure, double theta, MixingFamily family) {
  if (!(lambda > 0.0)) return kNegInf;
  return events * std::log(lambda) - lambda * exposure + log_mixing_density(family, lambda, theta);
}

Eigen::VectorXd log_of(const Eigen::VectorXd& v) { return v.array().log().matrix(); }

double exposure_of(const UnitIndex& units, const Eigen::VectorXd& log_times,
                   const Eigen::VectorXd& eta, double gamma, std::size_t unit) {
  double a = 0.0;
  for (auto i : units.records[unit]) {
    const auto r = static_cast<Eigen::Index>(i);
    a += std::exp(gamma * (log_times[r] - eta[r]));
  }
  return a;
}

bool gibbs_lambda(MixingFamily family) {
  return family == MixingFamily::Gamma || family == MixingFamily::ExponentialOne;
}

}  // namespace

void check_invariants(const ChainState& state, const ModelSpec& spec, const PriorBundle& priors) {
  if (!state.beta.allFinite()) throw std::logic_error("chain state: non-finite beta");
  if (!(state.gamma > 0.0) || !std::isfinite(state.gamma)) throw std::logic_error("chain state: gamma <= 0");
  if (has_theta(spec.family) && !(priors.log_prior_theta_given_gamma(state.theta, state.gamma) > kNegInf)) {
    throw std::logic_error("chain state: theta outside its support");
  }
  for (double l : state.lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::logic_error("chain state: non-positive lambda");
  }
}

double log_full_conditional_beta_j(const ChainState& state, std::size_t j, const SurvivalDataset& data) {
  if (j >= static_cast<std::size_t>(state.beta.size())) {
    throw std::out_of_range("log_full_conditional_beta_j: coefficient index out of range");
  }
  const Eigen::VectorXd eta = data.covariates * state.beta;
  return beta_kernel(data, log_of(data.times), eta, state.gamma, state.lambdas);
}

double log_full_conditional_gamma(const ChainState& state, const SurvivalDataset& data,
                                  const PriorBundle& priors) {
  const Eigen::VectorXd eta = data.covariates * state.beta;
  return gamma_kernel(data, log_of(data.times), eta, state.gamma, state.theta, state.lambdas, priors);
}

double log_full_conditional_theta(const ChainState& state, const PriorBundle& priors) {
  return theta_kernel(state.lambdas, state.theta, state.gamma, priors);
}

double log_full_conditional_lambda(const ChainState& state, std::size_t unit,
                                   const SurvivalDataset& data, const UnitIndex& units,
                                   MixingFamily family) {
  const Eigen::VectorXd eta = data.covariates * state.beta;
  const double a = exposure_of(units, log_of(data.times), eta, state.gamma, unit);
  return lambda_kernel(state.lambdas.at(unit), units.events[unit], a, state.theta, family);
}

ChainState initial_state(const SurvivalDataset& data, const ModelSpec& spec, const PriorBundle& priors) {
  ChainState s;
  const Eigen::VectorXd y = log_of(data.times);
  const auto& x = data.covariates;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  s.beta = qr.solve(y);
  const auto n = x.rows();
  const auto k = x.cols();
  const Eigen::VectorXd resid = y - x * s.beta;
  const double sigma2 = n > k ? resid.squaredNorm() / static_cast<double>(n - k) : 1.0;
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  s.beta_log_scale.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double se = std::sqrt(std::max(sigma2 * xtx_inv(j, j), 1e-8));
    s.beta_log_scale[static_cast<std::size_t>(j)] = std::log(std::clamp(se, 1e-3, 1.0));
  }
  s.gamma = spec.gamma_fixed.value_or(1.0);
  if (has_theta(spec.family)) {
    if (!(s.gamma > priors.gamma_lower_bound())) {
      throw PreconditionError("initial gamma " + std::to_string(s.gamma) +
                              " is outside the prior support implied by E(cv) = " +
                              std::to_string(spec.expected_cv));
    }
    s.theta = theta_for_cv(spec.family, s.gamma, priors.cv_prior().median(s.gamma));
  }
  s.lambdas.assign(data.num_units(), 1.0);
  s.lambda_log_scale.assign(data.num_units(), std::log(0.5));
  return s;
}

GibbsSampler::GibbsSampler(const SurvivalDataset& data, ModelSpec spec, RunPlan plan)
    : data_(data),
      spec_(std::move(spec)),
      plan_(plan),
      priors_(spec_.family, spec_.expected_cv),
      units_((validate(data), data)),
      rng_(plan.seed) {
  plan_.validate();
  if (spec_.gamma_fixed && !(*spec_.gamma_fixed > 0.0)) {
    throw std::invalid_argument("ModelSpec: fixed gamma must be positive");
  }
  log_times_ = log_of(data_.times);
  set_state(initial_state(data_, spec_, priors_));
}

void GibbsSampler::set_state(ChainState state) {
  state_ = std::move(state);
  if (state_.lambdas.size() != data_.num_units()) throw std::invalid_argument("set_state: lambda count");
  if (state_.lambda_log_scale.size() != data_.num_units()) {
    state_.lambda_log_scale.assign(data_.num_units(), std::log(0.5));
  }
  if (state_.beta_log_scale.size() != static_cast<std::size_t>(state_.beta.size())) {
    state_.beta_log_scale.assign(static_cast<std::size_t>(state_.beta.size()), std::log(0.1));
  }
  if (!has_lambda(spec_.family)) std::fill(state_.lambdas.begin(), state_.lambdas.end(), 1.0);
  eta_ = data_.covariates * state_.beta;
  beta_kernel_ = beta_kernel(data_, log_times_, eta_, state_.gamma, state_.lambdas);
  beta_accept_.assign(static_cast<std::size_t>(state_.beta.size()), 0);
  beta_total_.assign(static_cast<std::size_t>(state_.beta.size()), 0);
  lambda_accept_.assign(data_.num_units(), 0);
}

void GibbsSampler::fail(const std::string& what) const {
  std::ostringstream msg;
  msg << what << " at iteration " << state_.iteration << "; state: beta = [";
  for (Eigen::Index j = 0; j < state_.beta.size(); ++j) msg << (j ? ", " : "") << state_.beta[j];
  msg << "], gamma = " << state_.gamma << ", theta = " << state_.theta;
  throw NumericError(msg.str());
}

void GibbsSampler::update_beta() {
  const auto k = state_.beta.size();
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double step = std::exp(state_.beta_log_scale[ju]) * normal_(rng_);
    Eigen::VectorXd eta_prop = eta_ + step * data_.covariates.col(j);
    const double prop = beta_kernel(data_, log_times_, eta_prop, state_.gamma, state_.lambdas);
    if (std::log(uniform_(rng_)) < prop - beta_kernel_) {
      state_.beta[j] += step;
      eta_.swap(eta_prop);
      beta_kernel_ = prop;
      ++beta_accept_[ju];
      if (!adapting_) ++beta_total_[ju];
    }
  }
}

void GibbsSampler::update_gamma() {
  if (spec_.gamma_fixed) return;
  const double current = gamma_kernel(data_, log_times_, eta_, state_.gamma, state_.theta,
                                      state_.lambdas, priors_);
  if (!std::isfinite(current)) fail("non-finite gamma kernel");
  const double log_prop = std::log(state_.gamma) + std::exp(state_.gamma_log_scale) * normal_(rng_);
  const double g_prop = std::exp(log_prop);
  const double prop = gamma_kernel(data_, log_times_, eta_, g_prop, state_.theta, state_.lambdas, priors_);
  const double log_ratio = prop - current + log_prop - std::log(state_.gamma);
  if (std::log(uniform_(rng_)) < log_ratio) {
    state_.gamma = g_prop;
    beta_kernel_ = beta_kernel(data_, log_times_, eta_, state_.gamma, state_.lambdas);
    ++gamma_accept_;
    if (!adapting_) ++gamma_total_;
  }
}

void GibbsSampler::update_theta() {
  if (!has_theta(spec_.family)) return;
  const double lb = theta_lower_bound(spec_.family, state_.gamma);
  const double current = theta_kernel(state_.lambdas, state_.theta, state_.gamma, priors_);
  if (!std::isfinite(current)) fail("non-finite theta kernel");
  const double phi = std::log(state_.theta - lb);
  const double phi_prop = phi + std::exp(state_.theta_log_scale) * normal_(rng_);
  const double t_prop = lb + std::exp(phi_prop);
  const double prop = theta_kernel(state_.lambdas, t_prop, state_.gamma, priors_);
  if (std::log(uniform_(rng_)) < prop - current + phi_prop - phi) {
    state_.theta = t_prop;
    ++theta_accept_;
    if (!adapting_) ++theta_total_;
  }
}

double GibbsSampler::lambda_exposure(std::size_t unit) const {
  return exposure_of(units_, log_times_, eta_, state_.gamma, unit);
}

void GibbsSampler::update_lambdas(std::span<const std::size_t> order) {
  const auto family = spec_.family;
  if (!has_lambda(family)) return;
  for (auto u : order) {
    const double a = lambda_exposure(u);
    const int d = units_.events[u];
    double& lambda = state_.lambdas[u];
    if (gibbs_lambda(family)) {
      const double shape_rate = family == MixingFamily::Gamma ? state_.theta : 1.0;
      lambda = std::gamma_distribution<double>(shape_rate + d, 1.0 / (shape_rate + a))(rng_);
      if (!(lambda > 0.0)) lambda = std::numeric_limits<double>::min();
      continue;
    }
    const double current = lambda_kernel(lambda, d, a, state_.theta, family);
    const double log_prop = std::log(lambda) + std::exp(state_.lambda_log_scale[u]) * normal_(rng_);
    const double l_prop = std::exp(log_prop);
    const double prop = lambda_kernel(l_prop, d, a, state_.theta, family);
    if (std::log(uniform_(rng_)) < prop - current + log_prop - std::log(lambda)) {
      lambda = l_prop;
      ++lambda_accept_[u];
      if (!adapting_) ++lambda_total_;
    }
  }
}

void GibbsSampler::adapt() {
  ++batches_;
  const double eta = std::pow(static_cast<double>(batches_), -0.6);
  const double w = static_cast<double>(batch_sweeps_);
  const double target = plan_.target_acceptance;
  for (std::size_t j = 0; j < beta_accept_.size(); ++j) {
    state_.beta_log_scale[j] += eta * (beta_accept_[j] / w - target);
    beta_accept_[j] = 0;
  }
  if (!spec_.gamma_fixed) state_.gamma_log_scale += eta * (gamma_accept_ / w - target);
  if (has_theta(spec_.family)) state_.theta_log_scale += eta * (theta_accept_ / w - target);
  if (has_lambda(spec_.family) && !gibbs_lambda(spec_.family)) {
    for (std::size_t u = 0; u < lambda_accept_.size(); ++u) {
      state_.lambda_log_scale[u] += eta * (lambda_accept_[u] / w - target);
    }
  }
  std::fill(lambda_accept_.begin(), lambda_accept_.end(), 0);
  gamma_accept_ = 0;
  theta_accept_ = 0;
  batch_sweeps_ = 0;
}

void GibbsSampler::sweep() {
  update_beta();
  update_gamma();
  update_theta();
  std::vector<std::size_t> order(units_.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  update_lambdas(order);
  // Lambdas moved: refresh the cached beta kernel.
  beta_kernel_ = beta_kernel(data_, log_times_, eta_, state_.gamma, state_.lambdas);
  ++state_.iteration;
  if (!adapting_) {
    ++counted_sweeps_;
  } else if (++batch_sweeps_ >= plan_.adaptation_window) {
    adapt();
  }
#ifndef NDEBUG
  check_invariants(state_, spec_, priors_);
#endif
}

PosteriorDraws GibbsSampler::run() {
  PosteriorDraws out;
  out.family = spec_.family;
  out.beta_names = data_.covariate_names;
  out.gamma_free = !spec_.gamma_fixed.has_value();
  const std::size_t burn = plan_.burn_in();
  const std::size_t total = plan_.total_iterations;
  out.draws.reserve(plan_.retained());
  adapting_ = true;
  for (std::size_t it = 0; it < total; ++it) {
    if (it == burn) {
      adapting_ = false;
      batch_sweeps_ = 0;
    }
    sweep();
    if (it >= burn && (it - burn + 1) % plan_.thin == 0) {
      ParameterPoint p{state_.beta, state_.gamma, has_theta(spec_.family) ? state_.theta : 0.0};
      auto terms = unit_logliks(data_, units_, spec_.family, p);
      const double ll = std::accumulate(terms.begin(), terms.end(), 0.0);
      if (!std::isfinite(ll)) fail("non-finite marginal log-likelihood");
      out.iterations.push_back(it + 1);
      out.draws.push_back(std::move(p));
      out.per_draw_loglik.push_back(ll);
      out.unit_loglik.push_back(std::move(terms));
      if (plan_.keep_lambdas) out.lambda_draws.push_back(state_.lambdas);
    }
  }
  const double sweeps = static_cast<double>(std::max<std::size_t>(counted_sweeps_, 1));
  out.acceptance.beta.resize(beta_total_.size());
  for (std::size_t j = 0; j < beta_total_.size(); ++j) out.acceptance.beta[j] = beta_total_[j] / sweeps;
  out.acceptance.gamma = spec_.gamma_fixed ? 0.0 : gamma_total_ / sweeps;
  out.acceptance.theta = has_theta(spec_.family) ? theta_total_ / sweeps : 0.0;
  if (has_lambda(spec_.family)) {
    out.acceptance.lambda = gibbs_lambda(spec_.family)
                                ? 1.0
                                : lambda_total_ / (sweeps * static_cast<double>(data_.num_units()));
  }
  return out;
}

PosteriorDraws run(const SurvivalDataset& data, const ModelSpec& spec, const RunPlan& plan) {
  GibbsSampler sampler(data, spec, plan);
  return sampler.run();
}

std::size_t RunPlan::burn_in() const {
  return static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(total_iterations)));
}

std::size_t RunPlan::retained() const { return (total_iterations - burn_in()) / thin; }

void RunPlan::validate() const {
  if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0)) {
    throw std::invalid_argument("RunPlan: burn-in fraction must lie in (0, 1)");
  }
  if (thin == 0) throw std::invalid_argument("RunPlan: thin must be at least 1");
  if (total_iterations == 0 || retained() == 0) throw std::invalid_argument("RunPlan: no draws retained");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw std::invalid_argument("RunPlan: target acceptance must lie in (0, 1)");
  }
  if (adaptation_window == 0) throw std::invalid_argument("RunPlan: adaptation window must be positive");
}

RunPlan RunPlan::paper_scale() {
  RunPlan plan;
  plan.total_iterations = 600000;
  plan.burn_in_fraction = 0.25;
  plan.thin = static_cast<std::size_t>(0.75 * 600000 / 9000);
  return plan;
}

RunPlan RunPlan::desk() {
  RunPlan plan;
  plan.total_iterations = 100000;
  plan.burn_in_fraction = 0.25;
  plan.thin = 10;
  return plan;
}

}  // namespace rmw
