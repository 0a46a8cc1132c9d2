#ifndef SFIE_FIXED_POINT_HPP
#define SFIE_FIXED_POINT_HPP

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/// Norms used for residuals and convergence tests on grid vectors.
///   DiscreteL2 -- sqrt(dt) * Euclidean norm, a Riemann approximation of the
///                 L2 norm on the grid interval.
///   Sup        -- max absolute entry.
enum class NormKind { DiscreteL2, Sup };

template <typename Scalar, typename Derived>
Scalar grid_norm(const Eigen::MatrixBase<Derived>& v, NormKind kind, Scalar dt) {
  switch (kind) {
    case NormKind::DiscreteL2:
      return std::sqrt(dt) * v.norm();
    case NormKind::Sup:
      return v.cwiseAbs().maxCoeff();
  }
  throw config_error("grid_norm: unknown norm kind");
}

/// Relaxation schedule kappa_n for the damped iteration
///   Y_{n+1} = (1 - kappa_n) Y_n + kappa_n S(Y_n).
/// kappa_n = 1 recovers the plain fixed-point sweep. In the merely
/// non-expansive regime convergence needs sum kappa_n (1 - kappa_n) = inf,
/// which a constant kappa in (0,1) satisfies; `always_averages()` reports
/// whether a schedule meets that sufficient condition.
template <typename Scalar = double>
struct KappaSchedule {
  std::function<Scalar(Eigen::Index)> value;  // n -> kappa_n, each in (0, 1]

  static KappaSchedule constant(Scalar kappa) {
    if (!(kappa > Scalar(0)) || kappa > Scalar(1))
      throw config_error("KappaSchedule::constant: kappa must lie in (0, 1]");
    return KappaSchedule{[kappa](Eigen::Index) { return kappa; }};
  }

  static KappaSchedule custom(std::function<Scalar(Eigen::Index)> fn) {
    if (!fn) throw config_error("KappaSchedule::custom: empty schedule");
    return KappaSchedule{std::move(fn)};
  }

  Scalar at(Eigen::Index n) const {
    const Scalar kappa = value ? value(n) : Scalar(1);
    if (!(kappa > Scalar(0)) || kappa > Scalar(1))
      throw config_error("KappaSchedule::at: schedule produced kappa outside (0, 1]");
    return kappa;
  }

  /// True when the first `horizon` terms already satisfy
  /// sum kappa_n (1 - kappa_n) >= threshold (a proxy for divergence of the
  /// series, which is what the averaged iteration needs when the operator is
  /// only non-expansive).
  bool always_averages(Eigen::Index horizon = 10000, Scalar threshold = Scalar(100)) const {
    Scalar sum = Scalar(0);
    for (Eigen::Index n = 0; n < horizon; ++n) {
      const Scalar k = at(n);
      sum += k * (Scalar(1) - k);
      if (sum >= threshold) return true;
    }
    return false;
  }
};

using KappaScheduleD = KappaSchedule<double>;

template <typename Scalar = double>
struct FixedPointConfig {
  KappaSchedule<Scalar> kappa = KappaSchedule<Scalar>::constant(Scalar(1));
  Scalar tolerance = Scalar(1e-12);
  Eigen::Index max_iterations = 200;
  NormKind norm = NormKind::DiscreteL2;
  Scalar dt = Scalar(1);                    // weight for the DiscreteL2 norm
  Scalar divergence_limit = Scalar(1e12);   // iterate norm beyond this aborts
};

using FixedPointConfigD = FixedPointConfig<double>;

/// Per-iteration record of a fixed-point run. residuals[n] is the relative
/// update size ||Y_{n+1} - Y_n|| / max(||Y_n||, 1); ratio_estimates[n] is the
/// ratio of consecutive residuals, an online estimate of the contraction
/// factor (empty first entry convention: ratio_estimates is one shorter).
template <typename Scalar = double>
struct IterationTrace {
  std::vector<Scalar> residuals;
  std::vector<Scalar> ratio_estimates;
  Eigen::Index iterations_used = 0;
  bool converged = false;
};

using IterationTraceD = IterationTrace<double>;

/// Thrown when the iterate norm exceeds the divergence limit or turns
/// non-finite. Carries the partial trace (residuals cast to double) so
/// callers can report how the blow-up unfolded.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, IterationTraceD trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const IterationTraceD& trace() const { return trace_; }

 private:
  IterationTraceD trace_;
};

namespace detail {

template <typename Scalar>
IterationTraceD to_double_trace(const IterationTrace<Scalar>& trace) {
  IterationTraceD out;
  out.residuals.assign(trace.residuals.begin(), trace.residuals.end());
  out.ratio_estimates.assign(trace.ratio_estimates.begin(), trace.ratio_estimates.end());
  out.iterations_used = trace.iterations_used;
  out.converged = trace.converged;
  return out;
}

}  // namespace detail

/// Runs the (relaxed) fixed-point iteration Y_{n+1} = (1-k_n) Y_n + k_n S(Y_n)
/// until the relative update falls below cfg.tolerance or cfg.max_iterations
/// sweeps have been spent. With kappa_n == 1 the update is exactly
/// Y_{n+1} = S(Y_n), bit for bit, so an unrolled network applying S directly
/// reproduces the same iterates. Throws divergence_error on blow-up.
template <typename Scalar, typename Op>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, IterationTrace<Scalar>> iterate(
    Op&& op, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y, const FixedPointConfig<Scalar>& cfg) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (!(cfg.tolerance > Scalar(0))) throw config_error("iterate: tolerance must be > 0");
  if (cfg.max_iterations < 1) throw config_error("iterate: max_iterations must be >= 1");

  IterationTrace<Scalar> trace;
  for (Eigen::Index n = 0; n < cfg.max_iterations; ++n) {
    const Scalar kappa = cfg.kappa.at(n);
    const Vector sy = op(y);
    if (sy.size() != y.size())
      throw dimension_error("iterate: operator changed the iterate's size");
    // kappa == 1 must reproduce S(Y) exactly (no rounding through the
    // relaxation arithmetic), so the averaged form is a separate branch.
    Vector y_next = (kappa == Scalar(1)) ? sy : ((Scalar(1) - kappa) * y + kappa * sy).eval();

    const Scalar denom = std::max(grid_norm(y, cfg.norm, cfg.dt), Scalar(1));
    const Scalar residual = grid_norm((y_next - y).eval(), cfg.norm, cfg.dt) / denom;
    if (!trace.residuals.empty() && trace.residuals.back() > Scalar(0))
      trace.ratio_estimates.push_back(residual / trace.residuals.back());
    trace.residuals.push_back(residual);
    trace.iterations_used = n + 1;

    const Scalar size = grid_norm(y_next, cfg.norm, cfg.dt);
    if (!std::isfinite(size) || size > cfg.divergence_limit)
      throw divergence_error("iterate: sweep diverged (iterate norm " + std::to_string(size) +
                                 " after " + std::to_string(n + 1) + " iterations)",
                             detail::to_double_trace(trace));

    y = std::move(y_next);
    if (residual < cfg.tolerance) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(y), std::move(trace)};
}

/// Smallest depth M with q^M / (1-q) * (c_dt + gap) <= epsilon, i.e. the
/// number of sweeps after which the a-priori bound
///   ||Y_M - Y*|| <= q^M / (1-q) * (c_dt + ||S g - g||)
/// falls below the target. Clamped to at least 1.
template <typename Scalar>
Eigen::Index prescribe_depth(Scalar q, Scalar epsilon, Scalar c_dt, Scalar gap) {
  if (!(q > Scalar(0)) || !(q < Scalar(1)))
    throw config_error("prescribe_depth: contraction factor must lie in (0, 1)");
  if (!(epsilon > Scalar(0))) throw config_error("prescribe_depth: epsilon must be > 0");
  if (!(c_dt >= Scalar(0)) || !(gap >= Scalar(0)))
    throw config_error("prescribe_depth: error constants must be >= 0");
  const Scalar scale = c_dt + gap;
  if (scale == Scalar(0)) return 1;  // bound is zero at any depth
  const Scalar ratio = epsilon * (Scalar(1) - q) / scale;
  if (ratio >= Scalar(1)) return 1;
  const Scalar m = std::ceil(std::log(ratio) / std::log(q));
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(m));
}

/// The a-priori bound itself, evaluated at a given depth.
template <typename Scalar = double>
struct ErrorBoundReport {
  Scalar contraction = Scalar(0);    // q
  Eigen::Index depth = 0;            // M
  Scalar discretization = Scalar(0); // c_dt
  Scalar forcing_gap = Scalar(0);    // ||S g - g||
  Scalar bound = Scalar(0);          // q^M / (1-q) * (c_dt + gap)
};

using ErrorBoundReportD = ErrorBoundReport<double>;

template <typename Scalar>
ErrorBoundReport<Scalar> error_bound_report(Scalar q, Eigen::Index depth, Scalar c_dt,
                                            Scalar gap) {
  if (!(q > Scalar(0)) || !(q < Scalar(1)))
    throw config_error("error_bound_report: contraction factor must lie in (0, 1)");
  if (depth < 1) throw config_error("error_bound_report: depth must be >= 1");
  ErrorBoundReport<Scalar> report;
  report.contraction = q;
  report.depth = depth;
  report.discretization = c_dt;
  report.forcing_gap = gap;
  report.bound = std::pow(q, static_cast<Scalar>(depth)) / (Scalar(1) - q) * (c_dt + gap);
  return report;
}

/// Empirical contraction factor: the largest observed ratio
/// ||S u - S v|| / ||u - v|| over randomly drawn probe pairs. An estimate
/// from below -- useful as a sanity check against the analytic certificate,
/// not as a proof of contraction.
template <typename Scalar, typename Op>
Scalar estimate_contraction(Op&& op, Eigen::Index size, Eigen::Index n_probes, RandomSeed seed,
                            NormKind norm = NormKind::DiscreteL2, Scalar dt = Scalar(1)) {
  if (size < 1) throw config_error("estimate_contraction: probe size must be >= 1");
  if (n_probes < 1) throw config_error("estimate_contraction: need at least one probe pair");
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const CounterRng rng = CounterRng(seed).fork(substream::probe);
  Scalar worst = Scalar(0);
  for (Eigen::Index p = 0; p < n_probes; ++p) {
    Vector u(size), v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
      const std::uint64_t base = static_cast<std::uint64_t>(p) * 2 * size + 2 * i;
      u[i] = static_cast<Scalar>(rng.normal(base));
      v[i] = static_cast<Scalar>(rng.normal(base + 1));
    }
    const Scalar gap = grid_norm((u - v).eval(), norm, dt);
    if (gap == Scalar(0)) continue;
    const Scalar image_gap = grid_norm((op(u) - op(v)).eval(), norm, dt);
    worst = std::max(worst, image_gap / gap);
  }
  return worst;
}

}  // namespace sfie

#endif  // SFIE_FIXED_POINT_HPP
