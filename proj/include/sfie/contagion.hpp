#ifndef SFIE_CONTAGION_HPP
#define SFIE_CONTAGION_HPP

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/spectral.hpp"

namespace sfie {

/// Exponentially decaying initial shock f(t) = level * e^{-decay t}.
struct ShockSpec {
  double level = 0.10;
  double decay = 0.0;

  double value(double t) const { return level * std::exp(-decay * t); }
  double derivative(double t) const { return -decay * value(t); }
};

/// Interbank distress model: bank i's distress follows
///
///   y_i(t) = f_i(t) + beta * sum_j a_ij int_0^t e^{-gamma (t-s)} y_j(s) ds,
///
/// a linear Volterra system whose memory kernel decays at the recovery rate.
struct ContagionNetwork {
  Eigen::MatrixXd exposures;        // a_ij >= 0, banks x banks
  double contagion_strength = 0.4;  // beta, 1/time
  double recovery_rate = 1.0;       // gamma, 1/time
  std::vector<ShockSpec> shocks;    // one per bank
  GridD grid{0.0, 10.0, 301};

  Eigen::Index banks() const { return exposures.rows(); }
};

inline void validate(const ContagionNetwork& net) {
  if (net.exposures.rows() != net.exposures.cols())
    throw dimension_error("ContagionNetwork: exposure matrix must be square");
  if (net.exposures.rows() < 1) throw config_error("ContagionNetwork: need at least one bank");
  if ((net.exposures.array() < 0.0).any())
    throw config_error("ContagionNetwork: exposures must be non-negative");
  if (!(net.contagion_strength > 0.0))
    throw config_error("ContagionNetwork: contagion strength must be > 0");
  if (!(net.recovery_rate > 0.0)) throw config_error("ContagionNetwork: recovery rate must be > 0");
  if (static_cast<Eigen::Index>(net.shocks.size()) != net.banks())
    throw dimension_error("ContagionNetwork: need exactly one shock per bank");
}

/// Discretizes the system into one affine block map y = b + W y on the
/// flattened state (bank i, node k) -> i*N + k:
///
///   W_(i,k),(j,l) = a_ij * beta * e^{-gamma (t_k - t_l)} * dt   for l <= k,
///   b_(i,k)       = f_i(t_k),
///
/// with strictly-future time blocks zero (causality) and the diagonal l = k
/// included at value a_ij * beta * dt.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_block_system(
    const ContagionNetwork& net) {
  validate(net);
  const Eigen::Index nb = net.banks();
  const Eigen::Index n = net.grid.n_nodes;
  const double dt = net.grid.step();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(nb * n, nb * n);
  Eigen::VectorXd b(nb * n);
  for (Eigen::Index i = 0; i < nb; ++i)
    for (Eigen::Index k = 0; k < n; ++k) {
      b[i * n + k] = net.shocks[static_cast<std::size_t>(i)].value(net.grid.node(k));
      for (Eigen::Index j = 0; j < nb; ++j) {
        if (net.exposures(i, j) == 0.0) continue;
        const double coupling = net.exposures(i, j) * net.contagion_strength * dt;
        for (Eigen::Index l = 0; l <= k; ++l)
          w(i * n + k, j * n + l) =
              coupling * std::exp(-net.recovery_rate * (net.grid.node(k) - net.grid.node(l)));
      }
    }
  return {std::move(w), std::move(b)};
}

/// Matrix-free form of the same block map, O(banks^2 * N) per sweep: the
/// exponential kernel turns each memory sum into the recursion
/// c_k = e^{-gamma dt} c_{k-1} + y_k, so fine grids never need the dense
/// block matrix. Agrees with assemble_block_system's W y to rounding.
inline Eigen::VectorXd contagion_apply(const ContagionNetwork& net, const Eigen::VectorXd& y) {
  const Eigen::Index nb = net.banks();
  const Eigen::Index n = net.grid.n_nodes;
  if (y.size() != nb * n) throw dimension_error("contagion_apply: state has wrong size");
  const double dt = net.grid.step();
  const double fade = std::exp(-net.recovery_rate * dt);

  // Per-bank memory sums c_{j,k} = sum_{l<=k} e^{-gamma (t_k - t_l)} y_j(t_l).
  Eigen::MatrixXd memory(nb, n);
  for (Eigen::Index j = 0; j < nb; ++j) {
    double c = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      c = fade * c + y[j * n + k];
      memory(j, k) = c;
    }
  }
  Eigen::VectorXd out(nb * n);
  for (Eigen::Index i = 0; i < nb; ++i)
    for (Eigen::Index k = 0; k < n; ++k) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < nb; ++j) acc += net.exposures(i, j) * memory(j, k);
      out[i * n + k] = net.contagion_strength * dt * acc;
    }
  return out;
}

/// Power-iteration convergence certificate for the block system: the affine
/// sweep contracts iff the estimate stays below 1. Runs to 1e-8 relative
/// agreement; if 10^4 steps do not settle, the returned estimate carries
/// converged = false and should be read as approximate.
inline SpectralEstimateD spectral_certificate(const Eigen::MatrixXd& w_block) {
  return spectral_radius(w_block);
}

struct ContagionSolution {
  Eigen::MatrixXd Y;            // banks x N distress trajectories
  double spectral_radius = 0.0; // certificate for the sweep matrix
  bool spectral_converged = false;
  std::vector<Eigen::Index> clipped_banks;  // banks whose distress left [0, 1]
  IterationTraceD trace;
};

/// Runs the affine sweep y <- b + W y to its fixed point and reshapes the
/// flattened state into per-bank trajectories. The spectral certificate is
/// computed first; a certificate >= 1 aborts before iterating, since the
/// sweep would diverge. Banks whose converged trajectory leaves [0, 1] are
/// reported in clipped_banks (the linear model can overshoot; that is a
/// warning, not an error).
inline ContagionSolution solve_contagion(const ContagionNetwork& net,
                                         const FixedPointConfigD& fp_cfg) {
  auto [w, b] = assemble_block_system(net);
  const SpectralEstimateD certificate = spectral_certificate(w);
  if (certificate.value >= 1.0)
    throw divergence_error(
        "solve_contagion: spectral certificate rho(W) = " + std::to_string(certificate.value) +
            " >= 1, the affine sweep cannot converge",
        IterationTraceD{});

  FixedPointConfigD cfg = fp_cfg;
  cfg.dt = net.grid.step();
  auto [y, trace] = iterate<double>(
      [&w, &b](const Eigen::VectorXd& v) { return (w * v + b).eval(); }, b, cfg);

  ContagionSolution sol;
  sol.spectral_radius = certificate.value;
  sol.spectral_converged = certificate.converged;
  sol.trace = std::move(trace);
  const Eigen::Index nb = net.banks();
  const Eigen::Index n = net.grid.n_nodes;
  sol.Y.resize(nb, n);
  for (Eigen::Index i = 0; i < nb; ++i)
    for (Eigen::Index k = 0; k < n; ++k) sol.Y(i, k) = y[i * n + k];
  for (Eigen::Index i = 0; i < nb; ++i)
    if ((sol.Y.row(i).array() < 0.0).any() || (sol.Y.row(i).array() > 1.0).any())
      sol.clipped_banks.push_back(i);
  return sol;
}

}  // namespace sfie

#endif  // SFIE_CONTAGION_HPP
