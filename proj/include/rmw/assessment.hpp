#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rmw/dataset.hpp"
#include "rmw/gibbs.hpp"

namespace rmw {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Shortest interval spanning ceil(mass * n) sorted samples; mass 1 gives
// (min, max). Needs at least 100 samples and 0 < mass <= 1.
Interval hpd_interval(std::span<const double> samples, double mass);

struct ParameterSummary {
  std::string name;
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  Interval hpd;
};

// One summary per beta, plus gamma when free and theta when present.
std::vector<ParameterSummary> summarize(const PosteriorDraws& draws, double mass = 0.95);

// Coordinate-wise posterior median of (beta, gamma, theta).
ParameterPoint posterior_median(const PosteriorDraws& draws);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
  double plugin_deviance = 0.0;
};

// DIC = E(D) + P_D with P_D = E(D) - D(plug-in), D = -2 log f(t | .).
DicResult dic(std::span<const double> per_draw_loglik, double plugin_loglik);
// Plug-in at the coordinate-wise posterior medians, marginal model.
DicResult dic(const PosteriorDraws& draws, const SurvivalDataset& data);

struct CpoResult {
  std::vector<double> log_cpo;  // one per unit
  double log_pseudo_marginal = 0.0;
  std::vector<std::size_t> flagged;  // units whose CPO underflowed
};

// Harmonic-mean CPO per unit, discarding the trim_fraction smallest
// likelihood values of each unit before averaging.
CpoResult cpo(const PosteriorDraws& draws, double trim_fraction = 0.01);
// log PsBF of model a against model b.
double log_psbf(const CpoResult& a, const CpoResult& b);

// Prior mean of the mixing law at the posterior-median theta.
double reference_rate(const PosteriorDraws& draws);

struct OutlierReport {
  double lambda_ref = 1.0;
  std::vector<double> bf;  // BF_01 per unit; small values flag outliers
  bool trimmed = false;
  std::vector<std::string> warnings;
};

// BF_01 for Lambda_u = lambda_ref against a free Lambda_u:
//   E_post[ pi(lambda_ref | beta, gamma, theta, t_u, c_u) ] * E[ 1 / dP(lambda_ref | theta) ]
// The second expectation is taken over the posterior draws of theta; when its
// largest trim_fraction of terms dominate the sum a trimmed mean is used.
OutlierReport outlier_bf(const PosteriorDraws& draws, const SurvivalDataset& data, double lambda_ref,
                         double trim_fraction = 0.01);

struct RcvSummary {
  double median = 1.0;
  Interval hpd{1.0, 1.0};
  std::size_t used = 0;
  std::size_t excluded = 0;  // draws outside the finite-cv region
  std::vector<double> values;
};

RcvSummary r_cv_posterior(const PosteriorDraws& draws, double mass = 0.95);

}  // namespace rmw
