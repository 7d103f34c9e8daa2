#include "rmw/path_sampling.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "rmw/heterogeneity.hpp"
#include "rmw/likelihood.hpp"

namespace rmw {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class SwitchPath {
 public:
  SwitchPath(const SurvivalDataset& data, const ModelSpec& reference, const ModelSpec& target)
      : data_(data), units_(data), reference_(reference), target_(target),
        priors_(target.family, target.expected_cv) {
    k_ = data.covariates.cols();
    dim_ = k_ + (gamma_free() ? 1 : 0) + (has_theta(target.family) ? 1 : 0);
  }

  Eigen::Index dim() const { return dim_; }
  bool gamma_free() const { return !target_.gamma_fixed.has_value(); }

  Eigen::VectorXd encode(const ParameterPoint& p) const {
    Eigen::VectorXd psi(dim_);
    psi.head(k_) = p.beta;
    Eigen::Index at = k_;
    if (gamma_free()) psi[at++] = std::log(p.gamma);
    if (has_theta(target_.family)) {
      psi[at] = std::log(p.theta - theta_lower_bound(target_.family, p.gamma));
    }
    return psi;
  }

  struct Eval {
    double log_density = kNegInf;  // at temperature t, with Jacobian
    double log_ratio = 0.0;        // log L_target - log L_ref
  };

  Eval evaluate(const Eigen::VectorXd& psi, double t) const {
    Eval e;
    ParameterPoint p;
    p.beta = psi.head(k_);
    Eigen::Index at = k_;
    double log_jac = 0.0;
    p.gamma = target_.gamma_fixed.value_or(1.0);
    if (gamma_free()) {
      p.gamma = std::exp(psi[at]);
      log_jac += psi[at++];
    }
    if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) return e;
    double log_prior = gamma_free() ? priors_.log_prior_gamma(p.gamma) : 0.0;
    if (has_theta(target_.family)) {
      p.theta = theta_lower_bound(target_.family, p.gamma) + std::exp(psi[at]);
      log_jac += psi[at];
      if (log_prior > kNegInf) log_prior += priors_.log_prior_theta_given_gamma(p.theta, p.gamma);
    }
    if (!(log_prior > kNegInf) || !std::isfinite(p.theta)) return e;
    ParameterPoint ref_point{p.beta, reference_.gamma_fixed.value_or(1.0), 0.0};
    double ll_target = 0.0;
    double ll_ref = 0.0;
    try {
      ll_target = marginal_loglik(data_, units_, target_.family, p);
      ll_ref = marginal_loglik(data_, units_, reference_.family, ref_point);
    } catch (const std::exception&) {
      return e;
    }
    if (!std::isfinite(ll_target) || !std::isfinite(ll_ref)) return e;
    e.log_ratio = ll_target - ll_ref;
    e.log_density = (1.0 - t) * ll_ref + t * ll_target + log_prior + log_jac;
    return e;
  }

 private:
  const SurvivalDataset& data_;
  UnitIndex units_;
  ModelSpec reference_;
  ModelSpec target_;
  PriorBundle priors_;
  Eigen::Index k_ = 0;
  Eigen::Index dim_ = 0;
};

}  // namespace

PathSamplingResult model_switch_log_bf(const SurvivalDataset& data, const ModelSpec& reference,
                                       const ModelSpec& target, const PathSamplingPlan& plan,
                                       std::optional<ParameterPoint> start) {
  if (reference.family != MixingFamily::None || !reference.gamma_fixed) {
    throw std::invalid_argument("model_switch_log_bf: reference must be a fixed-shape model without mixing");
  }
  if (plan.temperatures < 2 || plan.samples < 20) {
    throw std::invalid_argument("model_switch_log_bf: need >= 2 temperatures and >= 20 samples");
  }
  validate(data);
  SwitchPath path(data, reference, target);
  const auto d = path.dim();

  ParameterPoint init;
  if (start) {
    init = *start;
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.covariates);
    init.beta = qr.solve(data.times.array().log().matrix());
    init.gamma = target.gamma_fixed.value_or(1.0);
    if (has_theta(target.family)) {
      PriorBundle priors(target.family, target.expected_cv);
      init.theta = theta_for_cv(target.family, init.gamma, priors.cv_prior().median(init.gamma));
    }
  }
  if (target.gamma_fixed) init.gamma = *target.gamma_fixed;
  Eigen::VectorXd psi = path.encode(init);

  std::mt19937_64 rng(plan.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * 0.01;
  double log_scale = std::log(2.38 * 2.38 / static_cast<double>(d));
  Eigen::MatrixXd chol = cov.llt().matrixL();

  PathSamplingResult result;
  const std::size_t J = plan.temperatures;
  result.temperatures.resize(J);
  result.mean_log_ratio.resize(J);
  result.se_log_ratio.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    result.temperatures[j] = std::pow(static_cast<double>(j) / static_cast<double>(J - 1), plan.spacing_exponent);
  }

  std::size_t adapt_step = 0;
  for (std::size_t jj = J; jj-- > 0;) {
    const double t = result.temperatures[jj];
    auto current = path.evaluate(psi, t);
    if (!(current.log_density > kNegInf)) {
      throw std::runtime_error("model_switch_log_bf: starting point has zero density");
    }
    Eigen::VectorXd mean = psi;
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
    std::size_t seen = 0;
    std::vector<double> ratios;
    ratios.reserve(plan.samples);
    for (std::size_t it = 0; it < plan.burn_in + plan.samples; ++it) {
      Eigen::VectorXd z(d);
      for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
      const Eigen::VectorXd prop = psi + std::exp(0.5 * log_scale) * (chol * z);
      const auto cand = path.evaluate(prop, t);
      const bool accept = cand.log_density > kNegInf &&
                          std::log(uniform(rng)) < cand.log_density - current.log_density;
      if (accept) {
        psi = prop;
        current = cand;
      }
      if (it < plan.burn_in) {
        ++adapt_step;
        log_scale += std::pow(static_cast<double>(adapt_step), -0.6) * ((accept ? 1.0 : 0.0) - 0.234);
        ++seen;
        const Eigen::VectorXd delta = psi - mean;
        mean += delta / static_cast<double>(seen);
        second += delta * (psi - mean).transpose();
        if (seen >= 200 && seen % 100 == 0) {
          Eigen::MatrixXd emp = second / static_cast<double>(seen - 1);
          emp += Eigen::MatrixXd::Identity(d, d) * 1e-8;
          Eigen::LLT<Eigen::MatrixXd> llt(emp);
          if (llt.info() == Eigen::Success) chol = llt.matrixL();
        }
      } else {
        ratios.push_back(current.log_ratio);
      }
    }
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    // Batch means for the Monte Carlo error.
    const std::size_t batches = 20;
    const std::size_t len = ratios.size() / batches;
    double var = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      double bm = 0.0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += ratios[i];
      bm /= static_cast<double>(len);
      var += (bm - m) * (bm - m);
    }
    var /= static_cast<double>(batches - 1);
    result.mean_log_ratio[jj] = m;
    result.se_log_ratio[jj] = std::sqrt(var / static_cast<double>(batches));
  }

  double total = 0.0;
  double var = 0.0;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    const double w = 0.5 * (result.temperatures[j + 1] - result.temperatures[j]);
    total += w * (result.mean_log_ratio[j] + result.mean_log_ratio[j + 1]);
    var += w * w * (result.se_log_ratio[j] * result.se_log_ratio[j] +
                    result.se_log_ratio[j + 1] * result.se_log_ratio[j + 1]);
  }
  result.log_bf = total;
  result.mc_se = std::sqrt(var);
  return result;
}

}  // namespace rmw
