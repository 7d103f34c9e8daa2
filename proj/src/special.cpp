#include "rmw/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace rmw {

namespace {

// Newton iteration on the Hermite recurrence (orthonormal form), seeded with
// the classical asymptotic guesses.
GaussHermiteRule compute_gauss_hermite(std::size_t n) {
  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const std::size_t m = (n + 1) / 2;
  const double nd = static_cast<double>(n);
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / jd) * p2 - std::sqrt((jd - 1.0) / jd) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericError("gauss_hermite: Newton iteration did not converge");
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  // Ascending order.
  std::reverse(rule.nodes.begin(), rule.nodes.end());
  std::reverse(rule.weights.begin(), rule.weights.end());
  for (auto& x : rule.nodes) {
    if (x == 0.0) x = 0.0;
  }
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: need at least one node");
  static std::mutex mutex;
  static std::map<std::size_t, GaussHermiteRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
  return it->second;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double log_bessel_k_half_integer(int n, double z) {
  if (n < 0 || !(z > 0.0)) throw std::domain_error("log_bessel_k_half_integer: need n >= 0, z > 0");
  // K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_k (n+k)! / (k! (n-k)! (2z)^k)
  std::vector<double> terms(static_cast<std::size_t>(n) + 1);
  const double log2z = std::log(2.0 * z);
  for (int k = 0; k <= n; ++k) {
    terms[static_cast<std::size_t>(k)] = std::lgamma(n + k + 1.0) - std::lgamma(k + 1.0) -
                                         std::lgamma(n - k + 1.0) - k * log2z;
  }
  return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + log_sum_exp(terms);
}

double log_integrate_concave(const ConcaveLogIntegrand& g, std::size_t nodes,
                             double tail_tolerance) {
  // Bracket the root of g' (decreasing), then safeguarded Newton.
  double lo = -1.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && g.first(lo) < 0.0; ++i) lo *= 2.0;
  for (int i = 0; i < 200 && g.first(hi) > 0.0; ++i) hi *= 2.0;
  if (!(g.first(lo) >= 0.0) || !(g.first(hi) <= 0.0)) {
    throw NumericError("log_integrate_concave: could not bracket the mode");
  }
  double mode = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double d1 = g.first(mode);
    if (d1 > 0.0) lo = mode; else hi = mode;
    const double d2 = g.second(mode);
    double next = mode - d1 / d2;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - mode) <= 1e-13 * std::max(1.0, std::abs(mode))) {
      mode = next;
      break;
    }
    mode = next;
  }
  const double curvature = -g.second(mode);
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    throw NumericError("log_integrate_concave: non-concave integrand at the mode");
  }
  const double scale = std::sqrt(2.0 / curvature);
  const auto& rule = gauss_hermite(nodes);
  std::vector<double> terms(rule.nodes.size());
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double y = rule.nodes[j];
    terms[j] = std::log(rule.weights[j]) + y * y + g.value(mode + scale * y);
  }
  const double total = log_sum_exp(terms);
  const std::size_t edge = std::min<std::size_t>(2, terms.size() / 2);
  std::vector<double> tail;
  for (std::size_t j = 0; j < edge; ++j) {
    tail.push_back(terms[j]);
    tail.push_back(terms[terms.size() - 1 - j]);
  }
  const double result = std::log(scale) + total;
  // A half-size rule flags integrands too skewed for the Gaussian kernel.
  const auto& coarse = gauss_hermite(std::max<std::size_t>(nodes / 2, 2));
  std::vector<double> coarse_terms(coarse.nodes.size());
  for (std::size_t j = 0; j < coarse.nodes.size(); ++j) {
    const double y = coarse.nodes[j];
    coarse_terms[j] = std::log(coarse.weights[j]) + y * y + g.value(mode + scale * y);
  }
  const double drift = std::abs(log_sum_exp(coarse_terms) - total);
  if (std::isfinite(result) && std::exp(log_sum_exp(tail) - total) <= tail_tolerance &&
      drift <= tail_tolerance) {
    return result;
  }

  const double peak = g.value(mode);
  auto integrand = [&](double u) {
    const double v = g.value(mode + scale * u) - peak;
    return std::isfinite(v) ? std::exp(v) : 0.0;
  };
  double error = 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double area = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, -inf, inf, 15, 1e-12, &error);
  if (!(area > 0.0) || !std::isfinite(area)) {
    throw NumericError("log_integrate_concave: adaptive fallback failed (mode=" +
                       std::to_string(mode) + ", curvature=" + std::to_string(curvature) + ")");
  }
  return std::log(scale) + std::log(area) + peak;
}

}  // namespace rmw
