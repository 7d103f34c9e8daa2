#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmw {

// Raised when a numerical routine (quadrature, root finding, kernel
// evaluation) cannot deliver a finite answer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nodes and weights for the physicists' Hermite weight e^{-x^2}.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Rules are computed once per size and cached; the returned reference stays
// valid for the program lifetime.
const GaussHermiteRule& gauss_hermite(std::size_t n);

double log_sum_exp(std::span<const double> values);

// log K_{n+1/2}(z) for n >= 0 via the finite series for half-integer orders.
double log_bessel_k_half_integer(int n, double z);

// log of int_{-inf}^{inf} exp(g(x)) dx for a concave log-integrand g.
// Gauss-Hermite with `nodes` points centred at the mode of g and scaled by
// its curvature; falls back to adaptive Gauss-Kronrod when the outermost
// nodes carry relative mass above `tail_tolerance`.
struct ConcaveLogIntegrand {
  std::function<double(double)> value;
  std::function<double(double)> first;
  std::function<double(double)> second;
};

double log_integrate_concave(const ConcaveLogIntegrand& g, std::size_t nodes = 64,
                             double tail_tolerance = 1e-8);

}  // namespace rmw
