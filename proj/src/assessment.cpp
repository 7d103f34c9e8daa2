#include "rmw/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rmw/heterogeneity.hpp"
#include "rmw/likelihood.hpp"
#include "rmw/special.hpp"

namespace rmw {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

void require_draws(const PosteriorDraws& draws) {
  if (draws.size() == 0) throw std::invalid_argument("posterior draws are empty");
}

// log of the mean of exp(values) after dropping the `drop` largest entries.
double log_trimmed_mean_exp(std::vector<double> values, std::size_t drop) {
  std::sort(values.begin(), values.end());
  values.resize(values.size() - std::min(drop, values.size() - 1));
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

}  // namespace

Interval hpd_interval(std::span<const double> samples, double mass) {
  if (samples.size() < 100) {
    throw std::invalid_argument("hpd_interval: need at least 100 samples, got " +
                                std::to_string(samples.size()));
  }
  if (!(mass > 0.0 && mass <= 1.0)) throw std::invalid_argument("hpd_interval: mass must lie in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto keep = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
  if (keep >= n) return {sorted.front(), sorted.back()};
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + keep <= n; ++i) {
    const double w = sorted[i + keep - 1] - sorted[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {sorted[best], sorted[best + keep - 1]};
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws, double mass) {
  require_draws(draws);
  std::vector<std::pair<std::string, std::vector<double>>> columns;
  const auto k = static_cast<std::size_t>(draws.draws.front().beta.size());
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> v;
    v.reserve(draws.size());
    for (const auto& d : draws.draws) v.push_back(d.beta[static_cast<Eigen::Index>(j)]);
    columns.emplace_back(j < draws.beta_names.size() ? draws.beta_names[j] : "beta" + std::to_string(j), std::move(v));
  }
  if (draws.gamma_free) {
    std::vector<double> v;
    for (const auto& d : draws.draws) v.push_back(d.gamma);
    columns.emplace_back("gamma", std::move(v));
  }
  if (has_theta(draws.family)) {
    std::vector<double> v;
    for (const auto& d : draws.draws) v.push_back(d.theta);
    columns.emplace_back("theta", std::move(v));
  }
  std::vector<ParameterSummary> out;
  for (auto& [name, v] : columns) {
    ParameterSummary s;
    s.name = name;
    const double n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.median = median_of(v);
    s.hpd = hpd_interval(v, mass);
    out.push_back(std::move(s));
  }
  return out;
}

ParameterPoint posterior_median(const PosteriorDraws& draws) {
  require_draws(draws);
  ParameterPoint p;
  const auto k = draws.draws.front().beta.size();
  p.beta.resize(k);
  std::vector<double> v(draws.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    for (std::size_t s = 0; s < draws.size(); ++s) v[s] = draws.draws[s].beta[j];
    p.beta[j] = median_of(v);
  }
  for (std::size_t s = 0; s < draws.size(); ++s) v[s] = draws.draws[s].gamma;
  p.gamma = median_of(v);
  for (std::size_t s = 0; s < draws.size(); ++s) v[s] = draws.draws[s].theta;
  p.theta = median_of(v);
  return p;
}

DicResult dic(std::span<const double> per_draw_loglik, double plugin_loglik) {
  if (per_draw_loglik.empty()) throw std::invalid_argument("dic: no draws");
  DicResult r;
  const double mean_ll = std::accumulate(per_draw_loglik.begin(), per_draw_loglik.end(), 0.0) /
                         static_cast<double>(per_draw_loglik.size());
  r.mean_deviance = -2.0 * mean_ll;
  r.plugin_deviance = -2.0 * plugin_loglik;
  r.p_d = r.mean_deviance - r.plugin_deviance;
  r.dic = r.mean_deviance + r.p_d;
  return r;
}

DicResult dic(const PosteriorDraws& draws, const SurvivalDataset& data) {
  require_draws(draws);
  const UnitIndex units(data);
  const auto point = posterior_median(draws);
  return dic(draws.per_draw_loglik, marginal_loglik(data, units, draws.family, point));
}

CpoResult cpo(const PosteriorDraws& draws, double trim_fraction) {
  require_draws(draws);
  if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) throw std::invalid_argument("cpo: bad trim fraction");
  const std::size_t s_count = draws.size();
  const std::size_t units = draws.unit_loglik.front().size();
  const auto drop = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(s_count)));
  CpoResult r;
  r.log_cpo.resize(units);
  std::vector<double> neg(s_count);
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t s = 0; s < s_count; ++s) neg[s] = -draws.unit_loglik[s][u];
    // CPO_u = 1 / mean(1 / f); dropping the largest 1/f = smallest likelihoods.
    r.log_cpo[u] = -log_trimmed_mean_exp(neg, drop);
    if (!std::isfinite(r.log_cpo[u])) r.flagged.push_back(u);
  }
  r.log_pseudo_marginal = std::accumulate(r.log_cpo.begin(), r.log_cpo.end(), 0.0);
  return r;
}

double log_psbf(const CpoResult& a, const CpoResult& b) {
  return a.log_pseudo_marginal - b.log_pseudo_marginal;
}

double reference_rate(const PosteriorDraws& draws) {
  require_draws(draws);
  if (!has_theta(draws.family)) return 1.0;
  std::vector<double> theta;
  for (const auto& d : draws.draws) theta.push_back(d.theta);
  return mixing_mean(draws.family, median_of(theta));
}

OutlierReport outlier_bf(const PosteriorDraws& draws, const SurvivalDataset& data, double lambda_ref,
                         double trim_fraction) {
  require_draws(draws);
  if (!(lambda_ref > 0.0)) throw std::invalid_argument("outlier_bf: lambda_ref must be positive");
  const UnitIndex units(data);
  OutlierReport report;
  report.lambda_ref = lambda_ref;
  const std::size_t n_units = data.num_units();
  if (!has_lambda(draws.family)) {
    report.bf.assign(n_units, 1.0);
    report.warnings.push_back("model has no latent rates; BF_01 is identically 1");
    return report;
  }
  const std::size_t s_count = draws.size();
  const Eigen::VectorXd log_t = data.times.array().log().matrix();
  const double log_ref = std::log(lambda_ref);
  std::vector<std::vector<double>> first(n_units, std::vector<double>(s_count));
  std::vector<double> inv_prior(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto& p = draws.draws[s];
    const Eigen::VectorXd eta = data.covariates * p.beta;
    const double log_prior = log_mixing_density(draws.family, lambda_ref, p.theta);
    inv_prior[s] = -log_prior;
    for (std::size_t u = 0; u < n_units; ++u) {
      double a = 0.0;
      for (auto i : units.records[u]) {
        const auto r = static_cast<Eigen::Index>(i);
        a += std::exp(p.gamma * (log_t[r] - eta[r]));
      }
      const int d = units.events[u];
      // conditional posterior density of Lambda_u at lambda_ref
      first[u][s] = d * log_ref - lambda_ref * a + log_prior -
                    log_laplace_moment(draws.family, p.theta, d, a);
    }
  }
  // Heavy-tail guard on E[1/dP].
  const auto drop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(s_count))));
  double log_second = log_sum_exp(inv_prior) - std::log(static_cast<double>(s_count));
  if (s_count > drop + 1) {
    std::vector<double> sorted = inv_prior;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> top(sorted.end() - static_cast<std::ptrdiff_t>(drop), sorted.end());
    const double top_share = std::exp(log_sum_exp(top) - log_sum_exp(sorted));
    if (top_share > 0.5) {
      report.trimmed = true;
      report.warnings.push_back("E[1/dP(lambda_ref|theta)] is dominated by its largest terms; trimmed mean used");
      log_second = log_trimmed_mean_exp(inv_prior, drop);
    }
  }
  report.bf.resize(n_units);
  for (std::size_t u = 0; u < n_units; ++u) {
    const double log_first = log_sum_exp(first[u]) - std::log(static_cast<double>(s_count));
    report.bf[u] = std::exp(log_first + log_second);
  }
  return report;
}

RcvSummary r_cv_posterior(const PosteriorDraws& draws, double mass) {
  require_draws(draws);
  RcvSummary out;
  if (draws.family == MixingFamily::None) {
    out.values.assign(draws.size(), 1.0);
    out.used = draws.size();
    return out;
  }
  for (const auto& d : draws.draws) {
    try {
      const double r = r_cv(draws.family, d.gamma, d.theta);
      if (std::isfinite(r)) {
        out.values.push_back(r);
        continue;
      }
    } catch (const std::domain_error&) {
    }
    ++out.excluded;
  }
  out.used = out.values.size();
  if (out.values.empty()) {
    out.median = std::numeric_limits<double>::infinity();
    out.hpd = {out.median, out.median};
    return out;
  }
  out.median = median_of(out.values);
  out.hpd = out.values.size() >= 100 ? hpd_interval(out.values, mass)
                                     : Interval{*std::min_element(out.values.begin(), out.values.end()),
                                                *std::max_element(out.values.begin(), out.values.end())};
  return out;
}

}  // namespace rmw
