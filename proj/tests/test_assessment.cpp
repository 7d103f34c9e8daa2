#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "rmw/assessment.hpp"
#include "rmw/distributions.hpp"
#include "rmw/likelihood.hpp"
#include "rmw/path_sampling.hpp"
#include "rmw/special.hpp"
#include "test_support.hpp"

using rmw::MixingFamily;

namespace {

rmw::RunPlan small_plan(std::size_t total, std::size_t thin, std::uint64_t seed) {
  rmw::RunPlan p;
  p.total_iterations = total;
  p.burn_in_fraction = 0.25;
  p.thin = thin;
  p.seed = seed;
  return p;
}

// Draw set holding the same point repeatedly.
rmw::PosteriorDraws point_mass(const rmw::SurvivalDataset& d, MixingFamily family, const rmw::ParameterPoint& p,
                               std::size_t copies) {
  rmw::PosteriorDraws out;
  out.family = family;
  out.beta_names = d.covariate_names;
  const rmw::UnitIndex units(d);
  const auto terms = rmw::unit_logliks(d, units, family, p);
  for (std::size_t s = 0; s < copies; ++s) {
    out.iterations.push_back(s + 1);
    out.draws.push_back(p);
    out.unit_loglik.push_back(terms);
    out.per_draw_loglik.push_back(std::accumulate(terms.begin(), terms.end(), 0.0));
  }
  return out;
}

double record_loglik(const rmw::SurvivalDataset& d, std::size_t i, MixingFamily family,
                     const rmw::ParameterPoint& p) {
  const auto r = static_cast<Eigen::Index>(i);
  std::vector<double> x(d.num_covariates());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = d.covariates(r, static_cast<Eigen::Index>(j));
  std::vector<double> beta(p.beta.data(), p.beta.data() + p.beta.size());
  const rmw::RmwParams rp{rmw::aft_rate(x, beta, p.gamma), p.gamma, family, p.theta};
  return d.status[i] ? rmw::rmw_logpdf(d.times[r], rp) : rmw::rmw_logsurv(d.times[r], rp);
}

rmw::SurvivalDataset intercept_only(rmw::SurvivalDataset d) {
  d.covariates = d.covariates.leftCols(1).eval();
  d.covariate_names = {"intercept"};
  return d;
}

}  // namespace

TEST_CASE("HPD of uniform samples has the analytic width") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> x(100000);
  for (auto& v : x) v = u(rng);
  const auto h = rmw::hpd_interval(x, 0.95);
  CHECK(h.upper - h.lower == doctest::Approx(0.95).epsilon(0.02));
  const auto all = rmw::hpd_interval(x, 1.0);
  CHECK(all.lower == *std::min_element(x.begin(), x.end()));
  CHECK(all.upper == *std::max_element(x.begin(), x.end()));
}

TEST_CASE("HPD of symmetric samples matches the equal-tailed interval") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(1.5, 2.0);
  std::vector<double> x(200000);
  for (auto& v : x) v = z(rng);
  const auto h = rmw::hpd_interval(x, 0.95);
  CHECK(h.lower == doctest::Approx(1.5 - 1.959964 * 2.0).epsilon(0.02));
  CHECK(h.upper == doctest::Approx(1.5 + 1.959964 * 2.0).epsilon(0.02));
}

TEST_CASE("HPD contains the median of unimodal samples") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::normal_distribution<double> z(rep * 0.3, 1.0 + rep);
    std::gamma_distribution<double> g(0.8 + rep * 0.5, 1.0);
    std::vector<double> a(500);
    std::vector<double> b(500);
    for (auto& v : a) v = z(rng);
    for (auto& v : b) v = g(rng);
    for (const auto& s : {a, b}) {
      const auto h = rmw::hpd_interval(s, 0.95);
      const double m = rmw_test::median_of(s);
      CHECK(h.lower <= m);
      CHECK(m <= h.upper);
    }
  }
}

TEST_CASE("HPD rejects short samples and bad masses") {
  std::vector<double> few(99, 1.0);
  CHECK_THROWS_AS(rmw::hpd_interval(few, 0.95), std::invalid_argument);
  std::vector<double> enough(100, 1.0);
  CHECK_THROWS_AS(rmw::hpd_interval(enough, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rmw::hpd_interval(enough, 1.2), std::invalid_argument);
}

TEST_CASE("DIC of a degenerate chain is the plug-in deviance") {
  const auto d = rmw_test::synthetic_aft(40, {1.0, 0.3}, 1.3, MixingFamily::Gamma, 4.0, 0.2, 6);
  const rmw::ParameterPoint p{Eigen::Vector2d(1.0, 0.3), 1.3, 4.0};
  const auto draws = point_mass(d, MixingFamily::Gamma, p, 50);
  const auto r = rmw::dic(draws, d);
  const rmw::UnitIndex units(d);
  const double ll = rmw::marginal_loglik(d, units, MixingFamily::Gamma, p);
  CHECK(r.p_d == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.dic == doctest::Approx(-2.0 * ll).epsilon(1e-12));
}

TEST_CASE("DIC differences ignore a constant added to every log-likelihood") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> a(300);
  std::vector<double> b(300);
  for (auto& v : a) v = -150.0 + 2.0 * z(rng);
  for (auto& v : b) v = -140.0 + 3.0 * z(rng);
  const double base = rmw::dic(a, -147.0).dic - rmw::dic(b, -136.0).dic;
  for (double c : {-1000.0, 3.5, 1e4}) {
    auto ac = a;
    auto bc = b;
    for (auto& v : ac) v += c;
    for (auto& v : bc) v += c;
    const double shifted = rmw::dic(ac, -147.0 + c).dic - rmw::dic(bc, -136.0 + c).dic;
    CHECK(shifted == doctest::Approx(base).epsilon(1e-9));
    CHECK(rmw::dic(ac, -147.0 + c).p_d == doctest::Approx(rmw::dic(a, -147.0).p_d).epsilon(1e-9));
  }
}

TEST_CASE("effective parameter count of a large Weibull fit is near three") {
  const auto d = rmw_test::synthetic_aft(1000, {1.0, -0.5}, 1.4, MixingFamily::None, 0.0, 0.2, 12);
  const auto draws = rmw::run(d, rmw::ModelSpec{"w", MixingFamily::None, std::nullopt, 2.0},
                              small_plan(20000, 5, 8));
  const auto r = rmw::dic(draws, d);
  CAPTURE(r.p_d);
  CHECK(std::abs(r.p_d - 3.0) < 1.0);
}

TEST_CASE("pseudo Bayes factor examples") {
  const Eigen::VectorXd t = (Eigen::VectorXd(1) << 1.7).finished();
  const auto d = rmw::SurvivalDataset::ungrouped(t, {1}, Eigen::MatrixXd::Ones(1, 1), {"intercept"});
  const rmw::ParameterPoint pa{Eigen::VectorXd::Constant(1, 0.2), 1.0, 0.0};
  const rmw::ParameterPoint pb{Eigen::VectorXd::Constant(1, 1.1), 1.5, 0.0};
  const auto a = rmw::cpo(point_mass(d, MixingFamily::None, pa, 200));
  const auto b = rmw::cpo(point_mass(d, MixingFamily::None, pb, 200));
  const double la = rmw::weibull_logpdf(1.7, std::exp(-0.2), 1.0);
  const double lb = rmw::weibull_logpdf(1.7, std::exp(-1.5 * 1.1), 1.5);
  CHECK(rmw::log_psbf(a, b) == doctest::Approx(la - lb).epsilon(1e-12));
  CHECK(rmw::log_psbf(a, a) == 0.0);
}

TEST_CASE("harmonic-mean CPO agrees with leave-one-out refits") {
  const auto d = rmw_test::synthetic_aft(10, {0.8, 0.6}, 1.3, MixingFamily::None, 0.0, 0.2, 21);
  const rmw::ModelSpec spec{"w", MixingFamily::None, std::nullopt, 2.0};
  const auto full = rmw::run(d, spec, small_plan(200000, 10, 3));
  // The untrimmed estimator is the one with a leave-one-out identity; the
  // default 1% trim can only raise a CPO.
  const auto c = rmw::cpo(full, 0.0);
  const auto trimmed = rmw::cpo(full);
  REQUIRE(c.log_cpo.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < 10; ++k)
      if (k != i) keep.push_back(k);
    const auto rest = rmw::subset(d, keep);
    const auto loo = rmw::run(rest, spec, small_plan(200000, 10, 40 + i));
    std::vector<double> terms;
    for (const auto& p : loo.draws) terms.push_back(record_loglik(d, i, MixingFamily::None, p));
    const double oracle = rmw::log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
    CAPTURE(i);
    CHECK(std::exp(c.log_cpo[i] - oracle) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(trimmed.log_cpo[i] >= c.log_cpo[i]);
    CHECK(trimmed.log_cpo[i] - oracle < std::log(1.2));
  }
}

TEST_CASE("outlier Bayes factor is one when the data carry no information") {
  // A censored record at a vanishing time leaves the rate's posterior at its prior.
  const Eigen::VectorXd t = (Eigen::VectorXd(2) << 1e-200, 1e-200).finished();
  const auto d = rmw::SurvivalDataset::ungrouped(t, {0, 0}, Eigen::MatrixXd::Ones(2, 1), {"intercept"});
  for (auto family : {MixingFamily::Gamma, MixingFamily::InverseGaussian, MixingFamily::LogNormal}) {
    const double theta = family == MixingFamily::Gamma ? 3.0 : 0.8;
    const auto draws = point_mass(d, family, {Eigen::VectorXd::Zero(1), 1.0, theta}, 100);
    for (double ref : {0.5, 1.0, 2.0}) {
      const auto rep = rmw::outlier_bf(draws, d, ref);
      REQUIRE(rep.bf.size() == 2);
      CHECK(rep.bf[0] == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(rep.bf[1] == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("a planted long survivor has the smallest outlier Bayes factor") {
  auto d = rmw_test::synthetic_aft(50, {1.0, 0.4}, 1.0, MixingFamily::Gamma, 4.0, 0.0, 19);
  d.times[17] *= 50.0;
  const auto draws = rmw::run(d, rmw::ModelSpec{"g", MixingFamily::Gamma, 1.0, 2.0}, small_plan(20000, 10, 6));
  const auto rep = rmw::outlier_bf(draws, d, rmw::reference_rate(draws));
  REQUIRE(rep.bf.size() == d.size());
  for (double b : rep.bf) CHECK(b > 0.0);
  CHECK(std::min_element(rep.bf.begin(), rep.bf.end()) - rep.bf.begin() == 17);

  SUBCASE("relabelling records permutes the output") {
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    const auto shuffled = rmw::subset(d, perm);
    const auto again = rmw::outlier_bf(draws, shuffled, rmw::reference_rate(draws));
    for (std::size_t k = 0; k < perm.size(); ++k) CHECK(again.bf[k] == doctest::Approx(rep.bf[perm[k]]).epsilon(1e-12));
  }
}

TEST_CASE("outlier Bayes factors without latent rates are identically one") {
  const auto d = rmw_test::synthetic_aft(20, {1.0, 0.4}, 1.0, MixingFamily::None, 0.0, 0.2, 1);
  const auto draws = point_mass(d, MixingFamily::None, {Eigen::Vector2d(1.0, 0.4), 1.0, 0.0}, 100);
  const auto rep = rmw::outlier_bf(draws, d, 1.0);
  for (double b : rep.bf) CHECK(b == 1.0);
  CHECK_THROWS_AS(rmw::outlier_bf(draws, d, 0.0), std::invalid_argument);
}

TEST_CASE("heterogeneity ratio summaries") {
  SUBCASE("no mixing gives one") {
    const auto d = rmw_test::synthetic_aft(20, {1.0, 0.4}, 1.0, MixingFamily::None, 0.0, 0.2, 1);
    const auto r = rmw::r_cv_posterior(point_mass(d, MixingFamily::None, {Eigen::Vector2d(1.0, 0.4), 1.7, 0.0}, 150));
    CHECK(r.median == 1.0);
    for (double v : r.values) CHECK(v == 1.0);
  }
  SUBCASE("Gamma draws map monotonically, decreasing in theta") {
    rmw::PosteriorDraws draws;
    draws.family = MixingFamily::Gamma;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(2.1, 30.0);
    for (int s = 0; s < 300; ++s) draws.draws.push_back({Eigen::VectorXd::Zero(1), 1.0, u(rng)});
    const auto r = rmw::r_cv_posterior(draws);
    REQUIRE(r.values.size() == 300);
    CHECK(rmw::cv_star_squared_derivative(MixingFamily::Gamma, 1.0, 5.0) < 0.0);
    for (int i = 0; i < 300; ++i)
      for (int j = 0; j < 300; ++j)
        if (draws.draws[i].theta < draws.draws[j].theta) CHECK(r.values[i] > r.values[j]);
  }
  SUBCASE("strongly heterogeneous data keep the ratio away from one") {
    const auto d = rmw_test::synthetic_aft(200, {1.0, 0.5}, 1.0, MixingFamily::InverseGaussian, 0.2, 0.1, 14);
    const auto draws = rmw::run(d, rmw::ModelSpec{"ig", MixingFamily::InverseGaussian, 1.0, 2.0},
                                small_plan(20000, 10, 2));
    const auto r = rmw::r_cv_posterior(draws);
    CAPTURE(r.hpd.lower);
    CHECK(r.hpd.lower > 1.2);
    CHECK(r.excluded == 0);
  }
}

TEST_CASE("path sampling: identical models have a zero log Bayes factor") {
  const auto d = intercept_only(rmw_test::synthetic_aft(30, {1.0, 0.0}, 1.0, MixingFamily::None, 0.0, 0.2, 3));
  const rmw::ModelSpec ref{"e", MixingFamily::None, 1.0, 2.0};
  rmw::PathSamplingPlan plan;
  plan.samples = 500;
  plan.burn_in = 200;
  const auto r = rmw::model_switch_log_bf(d, ref, ref, plan);
  CHECK(r.log_bf == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.temperatures.size() == 20);
  CHECK(r.temperatures.front() == 0.0);
  CHECK(r.temperatures.back() == 1.0);
  CHECK_THROWS_AS(rmw::model_switch_log_bf(d, rmw::ModelSpec{"w", MixingFamily::None, std::nullopt, 2.0}, ref, plan),
                  std::invalid_argument);
}

TEST_CASE("path sampling: Weibull against exponential matches a closed-form marginal likelihood") {
  const auto d = intercept_only(rmw_test::synthetic_aft(30, {0.7, 0.0}, 1.6, MixingFamily::None, 0.0, 0.2, 27));
  // With a flat intercept prior, integrating beta out gives
  //   m(gamma) = gamma^{d-1} prod t_i^{c_i (gamma-1)} Gamma(d) / (sum t_i^gamma)^d.
  const double events = static_cast<double>(d.num_events());
  auto log_m = [&](double g) {
    double s = 0.0;
    double lt = 0.0;
    for (Eigen::Index i = 0; i < d.times.size(); ++i) {
      s += std::pow(d.times[i], g);
      if (d.status[static_cast<std::size_t>(i)]) lt += std::log(d.times[i]);
    }
    return (events - 1.0) * std::log(g) + (g - 1.0) * lt + std::lgamma(events) - events * std::log(s);
  };
  const double ref = log_m(1.0);
  auto integrand = [&](double g) { return g > 0 ? std::exp(log_m(g) - ref - g) : 0.0; };
  const double oracle = std::log(rmw_test::integrate_half_line(integrand));

  rmw::PathSamplingPlan plan;
  const auto r = rmw::model_switch_log_bf(d, rmw::ModelSpec{"e", MixingFamily::None, 1.0, 2.0},
                                          rmw::ModelSpec{"w", MixingFamily::None, std::nullopt, 2.0}, plan);
  CAPTURE(oracle);
  CAPTURE(r.log_bf);
  CAPTURE(r.mc_se);
  CHECK(std::abs(r.log_bf - oracle) < 4.0 * r.mc_se + 0.1);
}

TEST_CASE("path sampling: Gamma mixing against exponential matches grid integration") {
  const auto d = intercept_only(rmw_test::synthetic_aft(30, {0.5, 0.0}, 1.0, MixingFamily::Gamma, 3.0, 0.2, 31));
  const rmw::PriorBundle priors(MixingFamily::Gamma, 2.0);
  // Lomax marginal: E[L^c e^{-L a}] = theta^theta Gamma(theta + c) / (Gamma(theta) (theta + a)^{theta + c})
  auto log_lik = [&](double b, double theta) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < d.times.size(); ++i) {
      const double a = d.times[i] * std::exp(-b);
      const double c = d.status[static_cast<std::size_t>(i)];
      out += c * (-b) + theta * std::log(theta) + std::lgamma(theta + c) - std::lgamma(theta) -
             (theta + c) * std::log(theta + a);
    }
    return out;
  };
  auto log_ref = [&](double b) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < d.times.size(); ++i)
      out += d.status[static_cast<std::size_t>(i)] * (-b) - d.times[i] * std::exp(-b);
    return out;
  };
  const int nb = 1200;
  const int nu = 800;
  const double blo = -6.0;
  const double bhi = 8.0;
  const double ulo = -12.0;
  const double uhi = 10.0;
  std::vector<double> target;
  std::vector<double> reference;
  for (int i = 0; i < nb; ++i) {
    const double b = blo + (i + 0.5) * (bhi - blo) / nb;
    reference.push_back(log_ref(b));
    for (int k = 0; k < nu; ++k) {
      const double u = ulo + (k + 0.5) * (uhi - ulo) / nu;
      const double theta = 2.0 + std::exp(u);
      target.push_back(log_lik(b, theta) + priors.log_prior_theta_given_gamma(theta, 1.0) + u);
    }
  }
  const double oracle = rmw::log_sum_exp(target) + std::log((uhi - ulo) / nu) - rmw::log_sum_exp(reference);

  rmw::PathSamplingPlan plan;
  const auto r = rmw::model_switch_log_bf(d, rmw::ModelSpec{"e", MixingFamily::None, 1.0, 2.0},
                                          rmw::ModelSpec{"g", MixingFamily::Gamma, 1.0, 2.0}, plan);
  CAPTURE(oracle);
  CAPTURE(r.log_bf);
  CAPTURE(r.mc_se);
  CHECK(std::abs(r.log_bf - oracle) < 4.0 * r.mc_se + 0.1);
}

TEST_CASE("summaries list every free parameter") {
  const auto d = rmw_test::synthetic_aft(60, {1.0, 0.4}, 1.2, MixingFamily::LogNormal, 0.4, 0.2, 10);
  const auto draws = rmw::run(d, rmw::ModelSpec{"ln", MixingFamily::LogNormal, std::nullopt, 2.0},
                              small_plan(4000, 5, 1));
  const auto s = rmw::summarize(draws);
  REQUIRE(s.size() == 4);
  CHECK(s[0].name == "intercept");
  CHECK(s[1].name == "x");
  for (const auto& p : s) {
    CHECK(p.hpd.lower <= p.median);
    CHECK(p.median <= p.hpd.upper);
  }
  const auto fixed = rmw::run(d, rmw::ModelSpec{"ln", MixingFamily::LogNormal, 1.0, 2.0}, small_plan(4000, 5, 1));
  CHECK(rmw::summarize(fixed).size() == 3);
  const auto med = rmw::posterior_median(draws);
  CHECK(med.beta[0] == doctest::Approx(s[0].median));
}
