#ifndef SFIE_BLACK_SCHOLES_HPP
#define SFIE_BLACK_SCHOLES_HPP

#include <Eigen/Core>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "sfie/errors.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/quadrature.hpp"
#include "sfie/spectral.hpp"

namespace sfie {

/// Market and discretization inputs for the option-pricing solvers. The
/// barrier solver works on s_grid, which must span exactly [barrier, strike].
struct BsConfig {
  double rate = 0.05;
  double sigma = 0.2;
  double maturity = 1.0;
  double strike = 100.0;
  double barrier = 90.0;
  GridD s_grid{90.0, 100.0, 201};
};

inline void validate(const BsConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw config_error("BsConfig: sigma must be > 0");
  if (!(cfg.rate >= 0.0)) throw config_error("BsConfig: rate must be >= 0");
  if (!(cfg.strike > 0.0)) throw config_error("BsConfig: strike must be > 0");
  if (!(cfg.barrier > 0.0)) throw config_error("BsConfig: barrier must be > 0");
  if (!(cfg.strike > cfg.barrier)) throw config_error("BsConfig: strike must exceed barrier");
}

/// Closed-form European call: S Phi(d1) - K e^{-r tau} Phi(d2), with the
/// normal CDF taken through the complementary error function.
inline double black_scholes_call(double s0, double strike, double rate, double sigma,
                                 double tau) {
  if (!(s0 > 0.0) || !(strike > 0.0) || !(sigma > 0.0))
    throw config_error("black_scholes_call: spot, strike and sigma must be > 0");
  if (tau <= 0.0) return std::max(s0 - strike, 0.0);
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * tau) / sd;
  const double d2 = d1 - sd;
  const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  return s0 * cdf(d1) - strike * std::exp(-rate * tau) * cdf(d2);
}

/// The triangular product kernel of the barrier reformulation, exactly as
/// written: t (K - S) on H <= t <= S and S (K - t) on S <= t <= K (K denotes
/// the strike). Continuous across t = S and symmetric in (S, t).
inline double greens_kernel(double s, double t_node, const BsConfig& cfg) {
  validate(cfg);
  if (s < cfg.barrier || s > cfg.strike || t_node < cfg.barrier || t_node > cfg.strike)
    throw std::domain_error("greens_kernel: arguments must lie in [barrier, strike]");
  return t_node <= s ? t_node * (cfg.strike - s) : s * (cfg.strike - t_node);
}

// ---------------------------------------------------------------------------
// European call by heat-kernel quadrature.
//
// With x = ln S, tau = T - t, V = e^{-r tau} u and u = e^{a x + b tau} w,
// a = -(r - sigma^2/2)/sigma^2 and b = -sigma^2 a^2 / 2, the pricing PDE
// collapses to the heat equation w_tau = (sigma^2/2) w_xx, so
//
//   w(x, tau) = (2 pi sigma^2 tau)^{-1/2}
//               int e^{-(x-xi)^2 / (2 sigma^2 tau)} e^{-a xi} (e^xi - K)+ dxi.
//
// The integrand is a sum of two Gaussians times exponentials; completing the
// square puts their mass at x + (1-a) sigma^2 tau and x - a sigma^2 tau. A
// Gauss-Legendre rule over [max(ln K, leftmost center - 14 sd), rightmost
// center + 14 sd] captures both bumps to beyond double precision while the
// payoff kink at ln K sits at the window edge, never inside it.
// ---------------------------------------------------------------------------

inline double price_greens_function(double s0, double strike, double rate, double sigma,
                                    double maturity, Eigen::Index nodes = 96) {
  if (!(s0 > 0.0) || !(strike > 0.0) || !(sigma > 0.0))
    throw config_error("price_greens_function: spot, strike and sigma must be > 0");
  if (nodes < 2) throw config_error("price_greens_function: need at least two quadrature nodes");
  const double tau = maturity;
  if (tau <= 0.0) return std::max(s0 - strike, 0.0);

  const double x = std::log(s0);
  const double a = -(rate - 0.5 * sigma * sigma) / (sigma * sigma);
  const double b = -0.5 * sigma * sigma * a * a;
  const double width = sigma * std::sqrt(tau);
  const double center_lo = x + std::min(1.0 - a, -a) * sigma * sigma * tau;
  const double center_hi = x + std::max(1.0 - a, -a) * sigma * sigma * tau;

  const double lo = std::max(std::log(strike), center_lo - 14.0 * width);
  const double hi = center_hi + 14.0 * width;
  if (!(hi > lo)) return 0.0;  // strike far above both Gaussian bumps

  const QuadratureRuleD rule = gauss_legendre<double>(nodes).mapped(lo, hi);
  const double inv_norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma * sigma * tau);
  double w = 0.0;
  for (Eigen::Index q = 0; q < nodes; ++q) {
    const double xi = rule.nodes[q];
    const double gap = x - xi;
    const double heat = std::exp(-gap * gap / (2.0 * sigma * sigma * tau));
    w += rule.weights[q] * heat * std::exp(-a * xi) * (std::exp(xi) - strike);
  }
  w *= inv_norm;
  return std::exp(-rate * tau) * std::exp(a * x + b * tau) * w;
}

/// Exact solution of the barrier problem: the pricing ODE is an Euler
/// equation with exponents 1 and -2r/sigma^2, so V = alpha S + beta S^m with
/// the constants fixed by V(H) = 0 and V(strike) = strike - H.
inline double barrier_closed_form(double s, const BsConfig& cfg) {
  validate(cfg);
  const double m = -2.0 * cfg.rate / (cfg.sigma * cfg.sigma);
  const double h = cfg.barrier;
  const double k = cfg.strike;
  if (cfg.rate == 0.0) return s - h;  // exponents coincide: V'' = 0 line
  const double denom = k - std::pow(h, 1.0 - m) * std::pow(k, m);
  const double alpha = (k - h) / denom;
  const double beta = -alpha * std::pow(h, 1.0 - m);
  return alpha * s + beta * std::pow(s, m);
}

/// Converged barrier solve: nu is the curvature V'' on the grid, V and dV the
/// reconstructed price and delta, c1/c2 the boundary-fit line coefficients,
/// and spectral_radius the power-iteration estimate for the sweep matrix.
struct BvpSolution {
  Eigen::VectorXd nu;
  Eigen::VectorXd V;
  Eigen::VectorXd dV;
  double c1 = 0.0;
  double c2 = 0.0;
  double spectral_radius = 0.0;
};

namespace detail {

/// Sweep kernel of the curvature equation. Writing the price as the boundary
/// line plus the double integral of nu against the two-point boundary Green's
/// function
///
///   G(S,t) = -(min(S,t) - H)(K - max(S,t)) / (K - H),
///
/// and eliminating V and V' from the pricing ODE leaves the fixed-point
/// equation
///
///   nu(S) = -phi(S) H + int_H^K phi(S) (G(S,t) - S dG/dS(S,t)) nu(t) dt,
///
/// with phi(S) = 2r / (sigma^2 S^2). dG/dS jumps across t = S, so the kernel
/// has left/right branch values at the seam; `left` selects the branch.
inline double bvp_sweep_kernel(double s, double t, const BsConfig& cfg, bool left) {
  const double h = cfg.barrier;
  const double k = cfg.strike;
  const double span = k - h;
  const double phi = 2.0 * cfg.rate / (cfg.sigma * cfg.sigma * s * s);
  const double g = -(std::min(s, t) - h) * (k - std::max(s, t)) / span;
  const double g_s = left ? (t - h) / span : -(k - t) / span;
  return phi * (g - s * g_s);
}

/// Antiderivative pair of nu by composite trapezoid: i1 ~ int_H^S nu,
/// p ~ int_H^S int_H^x nu. Both start at zero at the barrier.
inline void cumulative_trapezoids(const Eigen::VectorXd& nu, double dt, Eigen::VectorXd& i1,
                                  Eigen::VectorXd& p) {
  const Eigen::Index n = nu.size();
  i1.resize(n);
  p.resize(n);
  i1[0] = 0.0;
  p[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    i1[i] = i1[i - 1] + 0.5 * dt * (nu[i - 1] + nu[i]);
    p[i] = p[i - 1] + 0.5 * dt * (i1[i - 1] + i1[i]);
  }
}

}  // namespace detail

/// Assembles the sweep matrix for the curvature fixed point, one composite
/// trapezoid per branch so the seam node carries both one-sided kernel
/// values. Exposed for diagnostics and tests; solve_barrier_bvp builds it
/// internally.
inline Eigen::MatrixXd assemble_bvp_sweep(const BsConfig& cfg) {
  validate(cfg);
  const GridD& grid = cfg.s_grid;
  if (grid.lower != cfg.barrier || grid.upper != cfg.strike)
    throw config_error("assemble_bvp_sweep: s_grid must span exactly [barrier, strike]");
  const Eigen::Index n = grid.n_nodes;
  const double dt = grid.step();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = grid.node(i);
    if (i > 0)  // trapezoid over [H, S_i], left-branch values
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double scale = (j == 0 || j == i) ? 0.5 : 1.0;
        w(i, j) += scale * dt * detail::bvp_sweep_kernel(s, grid.node(j), cfg, true);
      }
    if (i < n - 1)  // trapezoid over [S_i, K], right-branch values
      for (Eigen::Index j = i; j < n; ++j) {
        const double scale = (j == i || j == n - 1) ? 0.5 : 1.0;
        w(i, j) += scale * dt * detail::bvp_sweep_kernel(s, grid.node(j), cfg, false);
      }
  }
  return w;
}

/// Solves the barrier problem by alternating (a) one affine sweep on the
/// curvature nu, (b) reconstruction of V and V' from nu by cumulative double
/// trapezoid with the boundary line fitted through a 2x2 solve, until
/// successive price iterates agree in sup norm. The sweep's forcing refresh
/// is folded into the affine update: with V reconstructed from nu, the ODE
/// residual -phi (V - S V') expands to exactly the assembled b + W nu.
inline std::pair<BvpSolution, IterationTraceD> solve_barrier_bvp(
    const BsConfig& cfg, const FixedPointConfigD& fp_cfg) {
  validate(cfg);
  const GridD& grid = cfg.s_grid;
  if (grid.lower != cfg.barrier || grid.upper != cfg.strike)
    throw config_error("solve_barrier_bvp: s_grid must span exactly [barrier, strike]");
  const Eigen::Index n = grid.n_nodes;
  const double dt = grid.step();
  const double h = cfg.barrier;
  const double k = cfg.strike;

  const Eigen::MatrixXd w = assemble_bvp_sweep(cfg);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = grid.node(i);
    b[i] = -2.0 * cfg.rate / (cfg.sigma * cfg.sigma * s * s) * h;
  }

  BvpSolution sol;
  sol.spectral_radius = spectral_radius(w).value;

  // Boundary-line system [[H, 1], [K, 1]] [c1, c2]' = [ -P(H), K - H - P(K) ].
  const double det = h - k;
  if (det == 0.0) throw config_error("solve_barrier_bvp: singular boundary system");

  const auto reconstruct = [&](const Eigen::VectorXd& nu, Eigen::VectorXd& v,
                               Eigen::VectorXd& dv, double& c1, double& c2) {
    Eigen::VectorXd i1, p;
    detail::cumulative_trapezoids(nu, dt, i1, p);
    const double rhs0 = 0.0 - p[0];
    const double rhs1 = (k - h) - p[n - 1];
    c1 = (rhs0 - rhs1) / det;
    c2 = (h * rhs1 - k * rhs0) / det;
    v.resize(n);
    dv.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      v[i] = p[i] + c1 * grid.node(i) + c2;
      dv[i] = i1[i] + c1;
    }
  };

  Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v_prev;
  Eigen::VectorXd dv_prev;
  double c1 = 0.0;
  double c2 = 0.0;
  reconstruct(nu, v_prev, dv_prev, c1, c2);

  IterationTraceD trace;
  for (Eigen::Index it = 0; it < fp_cfg.max_iterations; ++it) {
    const double kappa = fp_cfg.kappa.at(it);
    const Eigen::VectorXd swept = b + w * nu;
    nu = (kappa == 1.0) ? swept : ((1.0 - kappa) * nu + kappa * swept).eval();

    Eigen::VectorXd v;
    Eigen::VectorXd dv;
    reconstruct(nu, v, dv, c1, c2);

    const double denom = std::max(v_prev.cwiseAbs().maxCoeff(), 1.0);
    const double residual = (v - v_prev).cwiseAbs().maxCoeff() / denom;
    if (!trace.residuals.empty() && trace.residuals.back() > 0.0)
      trace.ratio_estimates.push_back(residual / trace.residuals.back());
    trace.residuals.push_back(residual);
    trace.iterations_used = it + 1;

    const double size = v.cwiseAbs().maxCoeff();
    if (!std::isfinite(size) || size > fp_cfg.divergence_limit)
      throw divergence_error("solve_barrier_bvp: sweep diverged (price sup norm " +
                                 std::to_string(size) + ")",
                             trace);
    v_prev = std::move(v);
    dv_prev = std::move(dv);
    if (residual < fp_cfg.tolerance) {
      trace.converged = true;
      break;
    }
  }

  sol.nu = std::move(nu);
  sol.V = std::move(v_prev);
  sol.dV = std::move(dv_prev);
  sol.c1 = c1;
  sol.c2 = c2;
  return {std::move(sol), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Polynomial compression of the price curve.
// ---------------------------------------------------------------------------

/// Chebyshev values T_0..T_degree at x mapped affinely from [lo, hi] to
/// [-1, 1].
inline Eigen::VectorXd chebyshev_row(double x, double lo, double hi, Eigen::Index degree) {
  const double z = 2.0 * (x - lo) / (hi - lo) - 1.0;
  Eigen::VectorXd row(degree + 1);
  row[0] = 1.0;
  if (degree >= 1) row[1] = z;
  for (Eigen::Index d = 2; d <= degree; ++d) row[d] = 2.0 * z * row[d - 1] - row[d - 2];
  return row;
}

/// Clenshaw evaluation of a Chebyshev series on [lo, hi].
inline double chebyshev_eval(const Eigen::VectorXd& coeffs, double x, double lo, double hi) {
  const double z = 2.0 * (x - lo) / (hi - lo) - 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  for (Eigen::Index d = coeffs.size() - 1; d >= 1; --d) {
    const double next = 2.0 * z * b1 - b2 + coeffs[d];
    b2 = b1;
    b1 = next;
  }
  return z * b1 - b2 + coeffs[0];
}

struct GalerkinResult {
  Eigen::VectorXd coefficients;  // Chebyshev series, degree + 1 entries
  Eigen::VectorXd samples;       // pricing-function values on the grid
  Eigen::VectorXd fitted;        // series values on the grid
  double relative_error = 0.0;   // ||fitted - samples||_2 / ||samples||_2
  Eigen::Index rank = 0;         // numerical rank of the basis matrix
};

/// Least-squares projection of the call-price curve S -> price(S) onto a
/// degree-`degree` polynomial over cfg.s_grid. The basis is Chebyshev (an
/// orthogonal basis by construction, so no normal equations are ever formed)
/// and the fit runs through a rank-revealing QR; rank-deficient bases are
/// solved in the leading well-conditioned columns.
inline GalerkinResult galerkin_projection(Eigen::Index degree, const BsConfig& cfg,
                                          Eigen::Index quadrature_nodes = 96) {
  validate(cfg);
  if (degree < 1) throw config_error("galerkin_projection: degree must be >= 1");
  const GridD& grid = cfg.s_grid;
  const Eigen::Index n = grid.n_nodes;

  GalerkinResult result;
  result.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    result.samples[i] = price_greens_function(grid.node(i), cfg.strike, cfg.rate, cfg.sigma,
                                              cfg.maturity, quadrature_nodes);

  Eigen::MatrixXd basis(n, degree + 1);
  for (Eigen::Index i = 0; i < n; ++i)
    basis.row(i) = chebyshev_row(grid.node(i), grid.lower, grid.upper, degree).transpose();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  qr.setThreshold(1e-12);
  result.rank = qr.rank();
  result.coefficients = qr.solve(result.samples);
  result.fitted = basis * result.coefficients;
  const double denom = result.samples.norm();
  result.relative_error =
      denom > 0.0 ? (result.fitted - result.samples).norm() / denom : result.fitted.norm();
  return result;
}

}  // namespace sfie

#endif  // SFIE_BLACK_SCHOLES_HPP
