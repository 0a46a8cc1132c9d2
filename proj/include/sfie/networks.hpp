#ifndef SFIE_NETWORKS_HPP
#define SFIE_NETWORKS_HPP

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>

#include "sfie/assemble.hpp"
#include "sfie/errors.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/kernels.hpp"
#include "sfie/paths.hpp"

namespace sfie {

/// Pointwise activations available between layers. All three have Lipschitz
/// constant 1, which the contraction certificates rely on.
enum class Activation { Identity, Tanh, Softplus };

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_activation(
    Activation phi, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  switch (phi) {
    case Activation::Identity:
      return x;
    case Activation::Tanh:
      return x.array().tanh().matrix();
    case Activation::Softplus:
      // Overflow-safe log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}).
      return x.unaryExpr([](Scalar v) {
        return std::max(v, Scalar(0)) + std::log1p(std::exp(-std::abs(v)));
      });
  }
  throw config_error("apply_activation: unknown activation");
}

template <typename Scalar = double>
constexpr Scalar activation_lipschitz(Activation) {
  return Scalar(1);  // identity, tanh and softplus are all 1-Lipschitz
}

// ---------------------------------------------------------------------------
// Linear network: the fixed-point sweep unrolled into M identical affine
// layers Y -> W Y + b. Running the network IS running M sweeps.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct LinearSFNN {
  LayerParams<Scalar> layer;
  Eigen::Index depth = 1;
  Grid<Scalar> grid;
  KernelSpec<Scalar> spec;
  std::optional<BrownianPath<Scalar>> path;
};

using LinearSFNND = LinearSFNN<double>;

template <typename Scalar>
LinearSFNN<Scalar> make_linear_sfnn(const Grid<Scalar>& grid, const KernelSpec<Scalar>& spec,
                                    const BrownianPath<std::type_identity_t<Scalar>>* path,
                                    Scalar relaxation,
                                    Eigen::Index depth) {
  if (depth < 1) throw config_error("make_linear_sfnn: depth must be >= 1");
  LinearSFNN<Scalar> net;
  net.layer = assemble_layer(grid, spec, path, relaxation);
  net.depth = depth;
  net.grid = grid;
  net.spec = spec;
  if (path != nullptr) net.path = *path;
  return net;
}

/// Forward pass: y0 (defaulting to the bias, i.e. the relaxed forcing) pushed
/// through `depth` copies of the layer. Each layer output is checked finite;
/// blow-up raises divergence_error with the layer-by-layer residual trace.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> run_linear(
    const LinearSFNN<Scalar>& net,
    std::optional<Eigen::Matrix<std::type_identity_t<Scalar>, Eigen::Dynamic, 1>> y0 =
        std::nullopt) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector y = y0 ? std::move(*y0) : Vector(net.layer.b);
  if (y.size() != net.layer.W.rows())
    throw dimension_error("run_linear: start vector does not match layer size");

  IterationTraceD trace;
  const Scalar dt = net.grid.step();
  for (Eigen::Index m = 0; m < net.depth; ++m) {
    const Vector y_next = (net.layer.W * y + net.layer.b).eval();
    const Scalar denom = std::max(grid_norm(y, NormKind::DiscreteL2, dt), Scalar(1));
    trace.residuals.push_back(
        static_cast<double>(grid_norm((y_next - y).eval(), NormKind::DiscreteL2, dt) / denom));
    trace.iterations_used = m + 1;
    const Scalar size = grid_norm(y_next, NormKind::DiscreteL2, dt);
    if (!std::isfinite(size) || size > Scalar(1e12))
      throw divergence_error("run_linear: forward pass diverged at layer " + std::to_string(m + 1),
                             trace);
    y = y_next;
  }
  return y;
}

/// Network value at an off-grid point: one readout layer on top of the grid
/// solution, built with the same quadrature convention as the hidden layers.
template <typename Scalar>
Scalar evaluate_offgrid(const LinearSFNN<Scalar>& net, Scalar t,
                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y_grid) {
  if (y_grid.size() != net.grid.n_nodes)
    throw dimension_error("evaluate_offgrid: grid vector has wrong size");
  const BrownianPath<Scalar>* path = net.path ? &*net.path : nullptr;
  const auto [w, bias] = assemble_readout(t, net.grid, net.spec, path, net.layer.relaxation);
  return w.dot(y_grid) + bias;
}

// ---------------------------------------------------------------------------
// Nonlinear deep network: X^{k+1} = f + K phi(X^k) + G (X^k . dW), the
// Fredholm fixed point with a pointwise activation inside the deterministic
// integral. K is stored dt-scaled; G holds raw kernel values and acts through
// the elementwise product with the (zero-padded) increment vector.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct NonlinearDSFNN {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K;  // kernel * dt
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> G;  // raw kernel values
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dw;              // increments, last entry 0
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> f;               // forcing at nodes
  Activation phi = Activation::Identity;
  Scalar certificate = Scalar(0);  // sqrt(2) (L ||K|| + ||G||), dt-scaled Frobenius
  Scalar dt = Scalar(1);
};

using NonlinearDSFNND = NonlinearDSFNN<double>;

template <typename Scalar>
NonlinearDSFNN<Scalar> make_dsfnn(const Grid<Scalar>& grid, const KernelSpec<Scalar>& spec,
                                  const BrownianPath<std::type_identity_t<Scalar>>* path,
                                  Activation phi) {
  detail::check_layer_inputs(grid, spec, path, Scalar(1), "make_dsfnn");
  const Eigen::Index n = grid.n_nodes;
  const Scalar dt = grid.step();

  NonlinearDSFNN<Scalar> net;
  net.phi = phi;
  net.dt = dt;
  net.K.setZero(n, n);
  net.G.setZero(n, n);
  net.dw.setZero(n);
  net.f.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar t = grid.node(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar s = grid.node(j);
      if (spec.has_deterministic()) net.K(i, j) = spec.deterministic_kernel(t, s) * dt;
      if (spec.has_stochastic()) net.G(i, j) = spec.stochastic_kernel(t, s);
    }
    net.f[i] = spec.forcing_at(t);
  }
  if (path != nullptr) net.dw.head(grid.intervals()) = path->increments;
  const Scalar lip = activation_lipschitz<Scalar>(phi);
  net.certificate = std::sqrt(Scalar(2)) * (lip * net.K.norm() + dt * net.G.norm());
  return net;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_dsfnn(
    const NonlinearDSFNN<Scalar>& net, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  if (x.size() != net.f.size()) throw dimension_error("apply_dsfnn: state has wrong size");
  return net.f + net.K * apply_activation(net.phi, x) + net.G * x.cwiseProduct(net.dw);
}

/// Runs the nonlinear network as a fixed-point iteration from X^0 = f.
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, IterationTrace<Scalar>> run_dsfnn(
    const NonlinearDSFNN<Scalar>& net, FixedPointConfig<Scalar> cfg) {
  cfg.dt = net.dt;
  return iterate<Scalar>([&net](const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
    return apply_dsfnn(net, x);
  }, net.f, cfg);
}

template <typename Scalar>
Scalar residual_norm(const NonlinearDSFNN<Scalar>& net,
                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
  return grid_norm((y - apply_dsfnn(net, y)).eval(), NormKind::DiscreteL2, net.dt);
}

// ---------------------------------------------------------------------------
// Volterra-Fredholm operator: the deterministic part splits into a causal
// memory kernel V (s <= t) and a full Fredholm kernel K; the stochastic sum
// is strictly causal (s < t) so it never anticipates the increment straddling
// the evaluation node.
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct VolterraFredholmOperator {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> V;  // causal kernel * dt, s <= t
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K;  // full kernel * dt
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> G;  // raw values, s < t strictly
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dw;              // increments, last entry 0
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> f;
  Activation phi = Activation::Identity;
  Scalar certificate = Scalar(0);  // L (||V|| + ||K||) + ||G||, dt-scaled Frobenius
  Scalar dt = Scalar(1);
};

using VolterraFredholmOperatorD = VolterraFredholmOperator<double>;

template <typename Scalar>
VolterraFredholmOperator<Scalar> make_volterra_fredholm(
    const Grid<Scalar>& grid, const typename KernelSpec<Scalar>::Kernel& volterra_kernel,
    const typename KernelSpec<Scalar>::Kernel& fredholm_kernel,
    const typename KernelSpec<Scalar>::Kernel& stochastic_kernel,
    const typename KernelSpec<Scalar>::Forcing& forcing,
    const BrownianPath<std::type_identity_t<Scalar>>* path,
    Activation phi) {
  if (stochastic_kernel && path == nullptr)
    throw config_error("make_volterra_fredholm: stochastic kernel needs a Brownian path");
  if (path != nullptr && !(path->grid == grid))
    throw dimension_error("make_volterra_fredholm: Brownian path grid differs from target grid");
  const Eigen::Index n = grid.n_nodes;
  const Scalar dt = grid.step();

  VolterraFredholmOperator<Scalar> op;
  op.phi = phi;
  op.dt = dt;
  op.V.setZero(n, n);
  op.K.setZero(n, n);
  op.G.setZero(n, n);
  op.dw.setZero(n);
  op.f.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar t = grid.node(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar s = grid.node(j);
      if (volterra_kernel && j <= i) op.V(i, j) = volterra_kernel(t, s) * dt;
      if (fredholm_kernel) op.K(i, j) = fredholm_kernel(t, s) * dt;
      if (stochastic_kernel && j < i) op.G(i, j) = stochastic_kernel(t, s);
    }
    if (forcing) op.f[i] = forcing(t);
  }
  if (path != nullptr) op.dw.head(grid.intervals()) = path->increments;
  const Scalar lip = activation_lipschitz<Scalar>(phi);
  op.certificate = lip * (op.V.norm() + op.K.norm()) + dt * op.G.norm();
  return op;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply_volterra_fredholm(
    const VolterraFredholmOperator<Scalar>& op,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  if (x.size() != op.f.size())
    throw dimension_error("apply_volterra_fredholm: state has wrong size");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> px = apply_activation(op.phi, x);
  return op.f + op.V * px + op.K * px + op.G * x.cwiseProduct(op.dw);
}

template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, IterationTrace<Scalar>>
run_volterra_fredholm(const VolterraFredholmOperator<Scalar>& op, FixedPointConfig<Scalar> cfg) {
  cfg.dt = op.dt;
  return iterate<Scalar>([&op](const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
    return apply_volterra_fredholm(op, x);
  }, op.f, cfg);
}

template <typename Scalar>
Scalar residual_norm(const VolterraFredholmOperator<Scalar>& op,
                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
  return grid_norm((y - apply_volterra_fredholm(op, y)).eval(), NormKind::DiscreteL2, op.dt);
}

}  // namespace sfie

#endif  // SFIE_NETWORKS_HPP
