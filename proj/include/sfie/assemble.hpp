#ifndef SFIE_ASSEMBLE_HPP
#define SFIE_ASSEMBLE_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

#include "sfie/errors.hpp"
#include "sfie/grid.hpp"
#include "sfie/kernels.hpp"
#include "sfie/paths.hpp"

namespace sfie {

/// One affine layer Y -> W * Y + b on grid values.
template <typename Scalar = double>
struct LayerParams {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> W;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b;
  Scalar relaxation = Scalar(1);
};

using LayerParamsD = LayerParams<double>;

namespace detail {

template <typename Scalar>
void check_layer_inputs(const Grid<Scalar>& grid, const KernelSpec<Scalar>& spec,
                        const BrownianPath<Scalar>* path, Scalar relaxation, const char* where) {
  if (!(relaxation > Scalar(0)) || relaxation > Scalar(1))
    throw config_error(std::string(where) + ": relaxation must lie in (0, 1]");
  if (spec.has_stochastic() && path == nullptr)
    throw config_error(std::string(where) +
                       ": kernel has a stochastic part but no Brownian path was given");
  if (path != nullptr) {
    if (!(path->grid == grid))
      throw dimension_error(std::string(where) + ": Brownian path grid differs from target grid");
    if (path->increments.size() != grid.intervals())
      throw dimension_error(std::string(where) + ": Brownian path has wrong increment count");
  }
}

}  // namespace detail

/// Discretizes one fixed-point sweep of the integral operator into an affine
/// layer with relaxation kappa:
///
///   W_ij = kappa * K(t_i, t_j) * dt  +  kappa * G(t_i, t_j) * dW_j
///          + (1 - kappa) * delta_ij,
///   b_i  = kappa * g(t_i).
///
/// The deterministic integral uses the left-rectangle weight dt on every
/// grid node; the stochastic sum pairs node j with the increment over
/// [t_j, t_{j+1}], so the final node carries no stochastic weight. Under a
/// causal mask the deterministic part keeps s <= t (diagonal inclusive) while
/// the stochastic part keeps s < t strictly, so the sum never anticipates the
/// increment straddling t.
template <typename Scalar>
LayerParams<Scalar> assemble_layer(const Grid<Scalar>& grid, const KernelSpec<Scalar>& spec,
                                   const BrownianPath<std::type_identity_t<Scalar>>* path,
                                   Scalar relaxation) {
  detail::check_layer_inputs(grid, spec, path, relaxation, "assemble_layer");
  const Eigen::Index n = grid.n_nodes;
  const Scalar dt = grid.step();
  const bool causal = spec.causal_mask == CausalMask::Causal;

  LayerParams<Scalar> layer;
  layer.relaxation = relaxation;
  layer.W.setZero(n, n);
  layer.b.setZero(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar t = grid.node(i);
    if (spec.has_deterministic()) {
      const Eigen::Index j_end = causal ? i + 1 : n;
      for (Eigen::Index j = 0; j < j_end; ++j)
        layer.W(i, j) += relaxation * spec.deterministic_kernel(t, grid.node(j)) * dt;
    }
    if (spec.has_stochastic()) {
      const Eigen::Index j_end = causal ? i : grid.intervals();
      for (Eigen::Index j = 0; j < std::min(j_end, grid.intervals()); ++j)
        layer.W(i, j) += relaxation * spec.stochastic_kernel(t, grid.node(j)) * path->increments[j];
    }
    layer.W(i, i) += Scalar(1) - relaxation;
    layer.b[i] = relaxation * spec.forcing_at(t);
  }
  return layer;
}

/// Readout row for an off-grid point t: weights w_j and bias beta such that
/// Y(t) ~= w . Y_grid + beta, using the same quadrature convention as
/// assemble_layer (dt weight per node, increment j on node j). Throws if t
/// lies outside the grid.
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Scalar> assemble_readout(
    Scalar t, const Grid<Scalar>& grid, const KernelSpec<Scalar>& spec,
    const BrownianPath<std::type_identity_t<Scalar>>* path, Scalar relaxation) {
  detail::check_layer_inputs(grid, spec, path, relaxation, "assemble_readout");
  if (!grid.contains(t)) throw config_error("assemble_readout: evaluation point outside grid");
  const Scalar dt = grid.step();
  const bool causal = spec.causal_mask == CausalMask::Causal;

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(grid.n_nodes);
  for (Eigen::Index j = 0; j < grid.n_nodes; ++j) {
    const Scalar s = grid.node(j);
    if (spec.has_deterministic() && (!causal || s <= t))
      w[j] += relaxation * spec.deterministic_kernel(t, s) * dt;
    if (spec.has_stochastic() && j < grid.intervals() && (!causal || s < t))
      w[j] += relaxation * spec.stochastic_kernel(t, s) * path->increments[j];
  }
  return {std::move(w), relaxation * spec.forcing_at(t)};
}

/// Mean-square contraction certificate for the operator: the iteration is a
/// contraction whenever
///
///   sqrt(2) * (L * ||K||_2 + ||G||_2) < 1,
///
/// where ||.||_2 is the L2(dt x dt) kernel norm, approximated here by the
/// Frobenius norm of the dt-scaled kernel value matrix, and L bounds the
/// Lipschitz constant of any pointwise nonlinearity applied between sweeps
/// (L = 1 for the plain linear iteration). The bound is pathwise-free: the
/// Brownian increments enter the iteration with It"o isometry, so only the
/// kernels' L2 mass matters.
template <typename Scalar>
Scalar operator_norm_bound(const KernelSpec<Scalar>& spec, const Grid<Scalar>& grid,
                           Scalar lipschitz = Scalar(1)) {
  if (!(lipschitz >= Scalar(0)))
    throw config_error("operator_norm_bound: Lipschitz constant must be >= 0");
  const Scalar dt = grid.step();
  Scalar k_sq = Scalar(0);
  Scalar g_sq = Scalar(0);
  for (Eigen::Index i = 0; i < grid.n_nodes; ++i)
    for (Eigen::Index j = 0; j < grid.n_nodes; ++j) {
      const Scalar t = grid.node(i);
      const Scalar s = grid.node(j);
      if (spec.has_deterministic()) {
        const Scalar k = spec.deterministic_kernel(t, s) * dt;
        k_sq += k * k;
      }
      if (spec.has_stochastic()) {
        const Scalar g = spec.stochastic_kernel(t, s) * dt;
        g_sq += g * g;
      }
    }
  return std::sqrt(Scalar(2)) * (lipschitz * std::sqrt(k_sq) + std::sqrt(g_sq));
}

}  // namespace sfie

#endif  // SFIE_ASSEMBLE_HPP
