#ifndef SFIE_SPECTRAL_HPP
#define SFIE_SPECTRAL_HPP

#include <Eigen/Core>
#include <cmath>

#include "sfie/errors.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/// Result of the power-iteration spectral radius estimate. When `converged`
/// is false the dominant eigenvalue ratio did not settle (e.g. a complex
/// conjugate pair dominates, or the matrix is nearly nilpotent) and `value`
/// is the last norm-growth estimate -- still an upper-trend indicator, but
/// flagged as approximate.
template <typename Scalar = double>
struct SpectralEstimate {
  Scalar value = Scalar(0);
  bool converged = false;
  Eigen::Index iterations_used = 0;
};

using SpectralEstimateD = SpectralEstimate<double>;

/// Estimates the spectral radius of a square matrix by normalized power
/// iteration with a deterministic random start vector: the estimate at step
/// k is ||W x_k|| with ||x_k|| = 1, declared converged once two consecutive
/// estimates agree to `rel_tol` (after the estimate itself has left zero).
template <typename Scalar>
SpectralEstimate<Scalar> spectral_radius(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& W,
    Scalar rel_tol = Scalar(1e-8), Eigen::Index max_iterations = 10000,
    RandomSeed seed = RandomSeed{0x5fec7a1u, 0}) {
  if (W.rows() != W.cols()) throw dimension_error("spectral_radius: matrix must be square");
  if (W.rows() == 0) throw dimension_error("spectral_radius: matrix is empty");
  if (!(rel_tol > Scalar(0))) throw config_error("spectral_radius: rel_tol must be > 0");

  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const CounterRng rng = CounterRng(seed).fork(substream::probe);
  Vector x(W.rows());
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    x[i] = static_cast<Scalar>(rng.normal(static_cast<std::uint64_t>(i)));
  x.normalize();

  SpectralEstimate<Scalar> est;
  Scalar prev = Scalar(-1);
  for (Eigen::Index k = 0; k < max_iterations; ++k) {
    const Vector wx = W * x;
    const Scalar growth = wx.norm();
    est.value = growth;
    est.iterations_used = k + 1;
    if (growth == Scalar(0)) {         // x landed in the kernel: radius ~ 0
      est.converged = true;
      return est;
    }
    if (prev >= Scalar(0) && std::abs(growth - prev) <= rel_tol * std::max(growth, Scalar(1e-300))) {
      est.converged = true;
      return est;
    }
    prev = growth;
    x = wx / growth;
  }
  return est;  // converged stays false: report the last estimate as approximate
}

}  // namespace sfie

#endif  // SFIE_SPECTRAL_HPP
