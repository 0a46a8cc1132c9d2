#ifndef SFIE_QUADRATURE_HPP
#define SFIE_QUADRATURE_HPP

#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "sfie/errors.hpp"

namespace sfie {

/// Gauss-Legendre rule on [-1, 1].
template <typename Scalar = double>
struct QuadratureRule {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  /// Same rule mapped affinely onto [a, b].
  QuadratureRule mapped(Scalar a, Scalar b) const {
    QuadratureRule out;
    const Scalar half = (b - a) / Scalar(2);
    const Scalar mid = (b + a) / Scalar(2);
    out.nodes = (half * nodes.array() + mid).matrix();
    out.weights = half * weights;
    return out;
  }
};

using QuadratureRuleD = QuadratureRule<double>;

/// n-point Gauss-Legendre nodes and weights, computed by Newton iteration on
/// the Legendre recurrence from the Chebyshev-angle initial guesses
/// cos(pi (i + 3/4) / (n + 1/2)). Weights are 2 / ((1 - x^2) P_n'(x)^2).
/// Exact for polynomials of degree 2n - 1; node accuracy is full double
/// precision for the sizes used here.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(Eigen::Index n) {
  if (n < 1) throw config_error("gauss_legendre: need at least one node");
  QuadratureRule<Scalar> rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const Eigen::Index half = (n + 1) / 2;
  for (Eigen::Index i = 0; i < half; ++i) {
    Scalar x = std::cos(std::numbers::pi_v<Scalar> * (static_cast<Scalar>(i) + Scalar(0.75)) /
                        (static_cast<Scalar>(n) + Scalar(0.5)));
    Scalar dp = Scalar(0);
    for (int iter = 0; iter < 100; ++iter) {
      // Three-term recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
      Scalar p0 = Scalar(1);
      Scalar p1 = x;
      for (Eigen::Index k = 1; k < n; ++k) {
        const Scalar p2 = ((Scalar(2 * k + 1)) * x * p1 - Scalar(k) * p0) / Scalar(k + 1);
        p0 = p1;
        p1 = p2;
      }
      // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1).
      dp = Scalar(n) * (x * p1 - p0) / (x * x - Scalar(1));
      const Scalar step = p1 / dp;
      x -= step;
      if (std::abs(step) < Scalar(1e-16)) break;
    }
    rule.nodes[i] = -x;  // roots found from the positive end; store ascending
    rule.nodes[n - 1 - i] = x;
    const Scalar w = Scalar(2) / ((Scalar(1) - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[half - 1] = Scalar(0);  // middle root is exactly 0
  return rule;
}

}  // namespace sfie

#endif  // SFIE_QUADRATURE_HPP
