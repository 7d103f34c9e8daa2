#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rmw/heterogeneity.hpp"
#include "test_support.hpp"

using rmw::MixingFamily;

namespace {

constexpr MixingFamily kTheta[] = {MixingFamily::Gamma, MixingFamily::InverseGaussian,
                                   MixingFamily::LogNormal};

// E[Lambda^p] under the textbook mixing density.
double mixing_moment(MixingFamily f, double p, double theta) {
  auto h = [&](double w) {
    const double l = std::exp(w);
    const double m = rmw_test::mixing_pdf(f, l, theta);
    return m > 0 ? std::exp((p + 1.0) * w + std::log(m)) : 0.0;
  };
  // unit panels near the bulk so narrow peaks are not missed
  double total = rmw_test::integrate(h, -200.0, -20.0) + rmw_test::integrate(h, 20.0, 60.0);
  for (double a = -20.0; a < 20.0; a += 1.0) total += rmw_test::integrate(h, a, a + 1.0);
  return total;
}

// Survival-time cv from E[T^k] = Gamma(1 + k/g) E[Lambda^{-k/g}].
double cv_by_moments(MixingFamily f, double gamma, double theta) {
  const double m1 = std::tgamma(1.0 + 1.0 / gamma) * mixing_moment(f, -1.0 / gamma, theta);
  const double m2 = std::tgamma(1.0 + 2.0 / gamma) * mixing_moment(f, -2.0 / gamma, theta);
  return std::sqrt(m2 / (m1 * m1) - 1.0);
}

}  // namespace

TEST_CASE("Weibull cv examples") {
  CHECK(rmw::cv_weibull(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rmw::cv_weibull(2.0) == doctest::Approx(std::sqrt(4.0 / M_PI - 1.0)).epsilon(1e-13));
  CHECK(rmw::cv_weibull(2.0) == doctest::Approx(0.5227).epsilon(1e-4));
  CHECK(rmw::cv_weibull(0.1) > 100.0);
  CHECK_THROWS_AS(rmw::cv_weibull(0.04), std::domain_error);
  CHECK_THROWS_AS(rmw::cv_weibull(-1.0), std::domain_error);
}

TEST_CASE("Weibull cv agrees with a Monte Carlo sample") {
  std::mt19937_64 rng(20240611);
  std::weibull_distribution<double> w(2.0, 1.0);
  double s1 = 0.0;
  double s2 = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double t = w(rng);
    s1 += t;
    s2 += t * t;
  }
  const double mean = s1 / n;
  const double cv = std::sqrt(s2 / n - mean * mean) / mean;
  CHECK(cv == doctest::Approx(rmw::cv_weibull(2.0)).epsilon(3e-3));
}

TEST_CASE("cv* closed-form examples") {
  CHECK(rmw::cv_star_squared(MixingFamily::Gamma, 1.0, 3.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(rmw::cv_star_squared(MixingFamily::InverseGaussian, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(rmw::cv_star_squared(MixingFamily::LogNormal, 1.0, 1e-14) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rmw::cv_star_squared(MixingFamily::LogNormal, 2.0, 0.8) == doctest::Approx(std::expm1(0.2)).epsilon(1e-14));
  CHECK(rmw::cv_star_squared(MixingFamily::None, 1.3, 0.0) == 0.0);
  CHECK_THROWS_AS(rmw::cv_star_squared(MixingFamily::Gamma, 1.0, 2.0), std::domain_error);
  CHECK_THROWS_AS(rmw::cv_star_squared(MixingFamily::Gamma, 0.5, 3.9), std::domain_error);
  CHECK_THROWS_AS(rmw::cv_star_squared(MixingFamily::LogNormal, 1.0, -0.1), std::domain_error);
}

TEST_CASE("Gamma cv* matches the moments of the mixing density") {
  // Gamma(theta, theta) has closed-form inverse moments, so cv* is checked
  // against quadrature of the textbook density.
  for (double gamma : {0.8, 1.0, 2.5}) {
    for (double theta : {2.0 / gamma + 0.7, 6.0, 40.0}) {
      const double m1 = mixing_moment(MixingFamily::Gamma, -1.0 / gamma, theta);
      const double m2 = mixing_moment(MixingFamily::Gamma, -2.0 / gamma, theta);
      CAPTURE(gamma);
      CAPTURE(theta);
      CHECK(rmw::cv_star_squared(MixingFamily::Gamma, gamma, theta) ==
            doctest::Approx(m2 / (m1 * m1) - 1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("survival-time cv equals the cv computed from moments") {
  // gamma = 1, Gamma theta = 3: E[T] = 3/2, E[T^2] = 9, so cv = sqrt(3).
  CHECK(rmw::cv_total(MixingFamily::Gamma, 1.0, 3.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
  CHECK(cv_by_moments(MixingFamily::Gamma, 1.0, 3.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-8));
  for (auto f : {MixingFamily::Gamma, MixingFamily::LogNormal}) {
    for (double gamma : {0.8, 1.0, 2.0}) {
      for (double theta : {0.4, 3.0, 9.0}) {
        if (!(theta > rmw::theta_lower_bound(f, gamma) + 0.3)) continue;
        CAPTURE(rmw::to_string(f));
        CAPTURE(gamma);
        CAPTURE(theta);
        CHECK(rmw::cv_total(f, gamma, theta) == doctest::Approx(cv_by_moments(f, gamma, theta)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("cv reduces to the Weibull cv without heterogeneity") {
  for (double gamma : {0.6, 1.0, 3.0}) {
    const double w = rmw::cv_weibull(gamma);
    CHECK(rmw::cv_total(MixingFamily::LogNormal, gamma, 1e-12) == doctest::Approx(w).epsilon(1e-9));
    CHECK(rmw::cv_total(MixingFamily::Gamma, gamma, 1e9) == doctest::Approx(w).epsilon(1e-7));
    CHECK(rmw::cv_total(MixingFamily::InverseGaussian, gamma, 1e9) == doctest::Approx(w).epsilon(1e-7));
    CHECK(rmw::cv_total(MixingFamily::None, gamma, 0.0) == doctest::Approx(w).epsilon(1e-14));
    CHECK(rmw::r_cv(MixingFamily::None, gamma, 0.0) == 1.0);
  }
}

TEST_CASE("cv never falls below the Weibull bound") {
  for (auto f : kTheta) {
    for (double gamma : {0.5, 1.0, 2.0, 4.0}) {
      const double lb = rmw::theta_lower_bound(f, gamma);
      for (double u = -8.0; u <= 12.0; u += 0.5) {
        const double theta = lb + std::exp(u);
        CHECK(rmw::cv_total(f, gamma, theta) >= rmw::cv_weibull(gamma));
        CHECK(rmw::r_cv(f, gamma, theta) >= 1.0);
      }
    }
  }
}

TEST_CASE("R_cv examples") {
  CHECK(rmw::r_cv(MixingFamily::Gamma, 1.0, 3.0) == doctest::Approx(rmw::cv_total(MixingFamily::Gamma, 1.0, 3.0)));
  for (auto f : kTheta) {
    CHECK(rmw::r_cv(f, 1.0, 4.0) == doctest::Approx(rmw::cv_total(f, 1.0, 4.0)).epsilon(1e-14));
    CHECK(rmw::r_cv(f, 2.0, 4.0) ==
          doctest::Approx(rmw::cv_total(f, 2.0, 4.0) / rmw::cv_weibull(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("cv is strictly increasing in cv* at fixed shape") {
  for (auto f : kTheta) {
    for (double gamma : {0.7, 1.0, 2.0}) {
      const double lb = rmw::theta_lower_bound(f, gamma);
      std::vector<std::pair<double, double>> pts;
      for (double u = -6.0; u <= 8.0; u += 0.25) {
        const double theta = lb + std::exp(u);
        pts.emplace_back(rmw::cv_star_squared(f, gamma, theta), rmw::cv_total(f, gamma, theta));
      }
      std::sort(pts.begin(), pts.end());
      for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].first > pts[i - 1].first) CHECK(pts[i].second > pts[i - 1].second);
      }
    }
  }
}

TEST_CASE("analytic d cv / d theta matches central differences") {
  for (auto f : kTheta) {
    for (double gamma : {0.8, 1.0, 2.0}) {
      const double lb = rmw::theta_lower_bound(f, gamma);
      for (double off : {0.3, 1.0, 4.0, 25.0, 200.0}) {
        const double theta = lb + off;
        const double h = 1e-5 * theta;
        const double fd = (rmw::cv_total(f, gamma, theta + h) - rmw::cv_total(f, gamma, theta - h)) / (2.0 * h);
        CAPTURE(rmw::to_string(f));
        CAPTURE(gamma);
        CAPTURE(theta);
        CHECK(rmw::cv_total_derivative(f, gamma, theta) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("derivative stays accurate past the large-theta switch") {
  for (auto f : {MixingFamily::Gamma, MixingFamily::InverseGaussian}) {
    for (double theta : {999.0, 1001.0, 1e4}) {
      const double h = 1e-3 * theta;
      const double fd = (rmw::cv_total(f, 1.0, theta + h) - rmw::cv_total(f, 1.0, theta - h)) / (2.0 * h);
      CHECK(rmw::cv_total_derivative(f, 1.0, theta) == doctest::Approx(fd).epsilon(1e-4));
      CHECK(rmw::cv_total_derivative(f, 1.0, theta) < 0.0);
    }
  }
}

TEST_CASE("log-normal cv* derivative is exact") {
  for (double gamma : {0.5, 1.0, 3.0}) {
    for (double theta : {0.01, 0.7, 5.0}) {
      CHECK(rmw::cv_star_squared_derivative(MixingFamily::LogNormal, gamma, theta) ==
            doctest::Approx(std::exp(theta / (gamma * gamma)) / (gamma * gamma)).epsilon(1e-15));
    }
  }
}

TEST_CASE("theta_for_cv inverts cv") {
  for (auto f : kTheta) {
    for (double gamma : {0.8, 1.0, 2.0}) {
      for (double target : {1.5, 2.0, 5.0, 10.0}) {
        if (!(target > rmw::cv_weibull(gamma))) continue;
        const double theta = rmw::theta_for_cv(f, gamma, target);
        CHECK(rmw::cv_total(f, gamma, theta) == doctest::Approx(target).epsilon(1e-10));
      }
    }
    CHECK_THROWS_AS(rmw::theta_for_cv(f, 1.0, 0.99), std::domain_error);
  }
}

TEST_CASE("cv prior is a shifted exponential with the elicited mean") {
  const rmw::CvPrior prior{2.0};
  for (double gamma : {0.8, 1.0, 2.0}) {
    const double w = rmw::cv_weibull(gamma);
    auto d = [&](double c) { return std::exp(prior.log_density(c, gamma)); };
    auto dm = [&](double c) { return c * std::exp(prior.log_density(c, gamma)); };
    CHECK(rmw_test::integrate(d, w, w + 200.0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rmw_test::integrate(dm, w, w + 200.0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(prior.log_density(w - 1e-9, gamma) == -std::numeric_limits<double>::infinity());
  }
  CHECK(prior.log_density(1.5, 0.5) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("induced theta prior integrates to one") {
  const rmw::CvPrior prior{2.0};
  for (auto f : kTheta) {
    for (double gamma : {0.8, 1.0, 2.0}) {
      const double lb = rmw::theta_lower_bound(f, gamma);
      // integrate in u = log(theta - lb)
      auto g = [&](double u) {
        const double theta = lb + std::exp(u);
        const double v = rmw::induced_log_prior_theta(f, gamma, theta, prior) + u;
        return std::isfinite(v) ? std::exp(v) : 0.0;
      };
      CAPTURE(rmw::to_string(f));
      CAPTURE(gamma);
      // composite Simpson; the integrand is smooth in u
      const double h = 0.005;
      const int n = 24000;
      double total = g(-60.0) + g(60.0);
      for (int i = 1; i < n; ++i) total += (i % 2 ? 4.0 : 2.0) * g(-60.0 + i * h);
      total *= h / 3.0;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    }
  }
}

TEST_CASE("induced prior puts no mass where cv is infinite") {
  const rmw::CvPrior prior{2.0};
  for (double gamma : {0.8, 1.0, 2.0}) {
    const double lb = 2.0 / gamma;
    for (double theta : {-1.0, 0.0, 0.5 * lb, lb}) {
      CHECK(rmw::induced_log_prior_theta(MixingFamily::Gamma, gamma, theta, prior) ==
            -std::numeric_limits<double>::infinity());
    }
    CHECK(std::isfinite(rmw::induced_log_prior_theta(MixingFamily::Gamma, gamma, lb + 1e-3, prior)));
  }
  CHECK_THROWS_AS(rmw::induced_log_prior_theta(MixingFamily::None, 1.0, 1.0, prior), std::invalid_argument);
}

TEST_CASE("pushforward of the induced prior reproduces the cv prior for every family") {
  const rmw::CvPrior prior{2.0};
  const double gamma = 1.3;
  std::vector<std::vector<double>> cvs;
  std::mt19937_64 rng(77);
  for (auto f : kTheta) {
    const double lb = rmw::theta_lower_bound(f, gamma);
    rmw_test::GridSampler sampler(
        [&](double u) { return rmw::induced_log_prior_theta(f, gamma, lb + std::exp(u), prior) + u; }, -30.0,
        30.0, 200000);
    std::vector<double> c(10000);
    for (auto& v : c) v = rmw::cv_total(f, gamma, lb + std::exp(sampler(rng)));
    cvs.push_back(std::move(c));
  }
  const double w = rmw::cv_weibull(gamma);
  auto cdf = [&](double c) { return c <= w ? 0.0 : -std::expm1(-(c - w) / (2.0 - w)); };
  for (std::size_t i = 0; i < cvs.size(); ++i) {
    CAPTURE(i);
    CHECK(rmw_test::ks_one_sample_p(cvs[i], cdf) > 0.01);
    for (std::size_t j = i + 1; j < cvs.size(); ++j) CHECK(rmw_test::ks_two_sample_p(cvs[i], cvs[j]) > 0.01);
  }
}

TEST_CASE("shape prior is a normalised truncated exponential") {
  for (auto f : kTheta) {
    for (double ecv : {1.5, 2.0, 5.0, 10.0}) {
      const rmw::PriorBundle bundle(f, ecv);
      const double gmin = bundle.gamma_lower_bound();
      CHECK(rmw::cv_weibull(gmin) == doctest::Approx(ecv).epsilon(1e-8));
      auto d = [&](double g) { return std::exp(bundle.log_prior_gamma(g)); };
      CHECK(rmw_test::integrate(d, gmin, gmin + 60.0) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(bundle.log_prior_gamma(0.99 * gmin) == -std::numeric_limits<double>::infinity());
      CHECK(bundle.log_prior_theta_given_gamma(1.0, 0.99 * gmin) == -std::numeric_limits<double>::infinity());
    }
  }
  const rmw::PriorBundle none(MixingFamily::None, 2.0);
  CHECK(none.gamma_lower_bound() == 0.0);
  CHECK(none.log_prior_theta_given_gamma(0.0, 1.0) == 0.0);
  CHECK(rmw::PriorBundle::beta_prior_is_flat());
}
