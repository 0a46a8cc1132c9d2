#ifndef SFIE_MERTON_HPP
#define SFIE_MERTON_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/neural_kernel.hpp"
#include "sfie/paths.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/*
 * Jump-diffusion asset model and its Volterra integral formulation.
 *
 * The asset follows
 *
 *     dS = mu S dt + sigma S dW + S (J - 1) dN,      S(0) = S0,
 *
 * with Poisson jump arrivals of rate lambda and i.i.d. lognormal jump sizes
 * J.  Integrating and compensating the jump measure turns the SDE into a
 * stochastic Volterra equation of the second kind,
 *
 *     S(t) = S0 + int_0^t mu~ S(s) ds + int_0^t sigma S(s) dW(s)
 *               + int_0^t S(s-) dN~(s),
 *
 * where mu~ = mu + lambda E[J - 1] is the compensated drift and
 * dN~ = (J - 1) dN - lambda E[J - 1] dt is the compensated jump increment.
 * On a uniform grid the equation becomes a lower-triangular linear system
 * whose Picard iteration converges superlinearly (the Volterra tail gains a
 * factor per sweep), which is what the solver below exploits.
 *
 * The exact solution used as the simulation oracle is
 *
 *     S(t) = S0 exp((mu - sigma^2/2) t + sigma W(t)) * prod_{tau_k <= t} J_k.
 */

/// Model and discretization parameters for the jump-diffusion solver.
struct MertonConfig {
  double drift = 0.05;
  double sigma = 0.2;
  double intensity = 1.0;                     ///< Poisson jump arrival rate.
  LogNormalParams jump_law{-0.10, 0.15};
  double spot = 1.0;
  double horizon = 1.0;
  Grid<double> grid{0.0, 1.0, 64};

  /// Drift of the compensated formulation: mu + lambda E[J - 1].
  double compensated_drift() const { return drift + intensity * jump_law.mean_excess(); }
};

inline void validate(const MertonConfig& cfg) {
  if (!(cfg.spot > 0.0)) throw config_error("merton: spot must be > 0");
  if (!(cfg.sigma >= 0.0)) throw config_error("merton: sigma must be >= 0");
  if (!(cfg.intensity >= 0.0)) throw config_error("merton: jump intensity must be >= 0");
  if (!(cfg.jump_law.sd_log >= 0.0)) throw config_error("merton: jump sd must be >= 0");
  if (!(cfg.horizon > 0.0)) throw config_error("merton: horizon must be > 0");
  if (cfg.grid.n_nodes < 2) throw config_error("merton: grid needs at least two nodes");
  if (cfg.grid.lower != 0.0 || cfg.grid.upper != cfg.horizon)
    throw config_error("merton: grid must span [0, horizon]");
}

/// Exact trajectory at the grid nodes from a cumulative Brownian sample
/// `w_nodes` (same length as the grid) and a jump path. Jumps at tau <= t_i
/// are included at node i.
inline Eigen::VectorXd exact_path_on_grid(const MertonConfig& cfg, const Grid<double>& grid,
                                          const Eigen::VectorXd& w_nodes,
                                          const JumpPath<double>& jumps) {
  const Eigen::Index n = grid.n_nodes;
  if (w_nodes.size() != n) throw dimension_error("exact_path_on_grid: W sample / grid mismatch");
  const double half_var = cfg.drift - 0.5 * cfg.sigma * cfg.sigma;
  Eigen::VectorXd out(n);
  double jump_product = 1.0;
  std::size_t next_jump = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = grid.node(i);
    while (next_jump < jumps.jump_times.size() && jumps.jump_times[next_jump] <= t) {
      jump_product *= jumps.multipliers[next_jump];
      ++next_jump;
    }
    out[i] = cfg.spot * std::exp(half_var * t + cfg.sigma * w_nodes[i]) * jump_product;
  }
  return out;
}

/// Draw one exact trajectory (Brownian and jumps sampled from `seed`).
inline Eigen::VectorXd simulate_merton_path(const MertonConfig& cfg, RandomSeed seed) {
  validate(cfg);
  const auto brownian = sample_brownian(cfg.grid, seed);
  const auto jumps = sample_jumps(cfg.horizon, cfg.intensity, cfg.jump_law, seed);
  return exact_path_on_grid(cfg, cfg.grid, brownian.cumulative(), jumps);
}

/// A frozen ensemble of driving noise and the matching exact trajectories.
/// Columns index paths throughout; increment rows index grid intervals.
struct MertonPathSet {
  std::vector<BrownianPath<double>> brownian;
  std::vector<JumpPath<double>> jumps;
  Eigen::MatrixXd exact;              ///< n_nodes x P exact solutions.
  Eigen::MatrixXd dw;                 ///< (n_nodes-1) x P Brownian increments.
  Eigen::MatrixXd jump_raw;           ///< (n_nodes-1) x P sum of (J-1) per interval.
  Eigen::MatrixXd jump_compensated;   ///< jump_raw minus the compensator per interval.

  Eigen::Index paths() const { return exact.cols(); }
  Eigen::Index nodes() const { return exact.rows(); }
};

/// Sample `n_paths` independent paths. Path p uses stream_id `base.stream_id + p`,
/// so a fixed base seed pins the whole ensemble.
inline MertonPathSet make_path_set(const MertonConfig& cfg, RandomSeed base,
                                   Eigen::Index n_paths) {
  validate(cfg);
  if (n_paths < 1) throw config_error("make_path_set: need at least one path");
  const Eigen::Index n = cfg.grid.n_nodes;
  MertonPathSet set;
  set.brownian.reserve(static_cast<std::size_t>(n_paths));
  set.jumps.reserve(static_cast<std::size_t>(n_paths));
  set.exact.resize(n, n_paths);
  set.dw.resize(n - 1, n_paths);
  set.jump_raw.resize(n - 1, n_paths);
  set.jump_compensated.resize(n - 1, n_paths);
  for (Eigen::Index p = 0; p < n_paths; ++p) {
    const RandomSeed seed{base.seed, base.stream_id + static_cast<std::uint64_t>(p)};
    set.brownian.push_back(sample_brownian(cfg.grid, seed));
    set.jumps.push_back(sample_jumps(cfg.horizon, cfg.intensity, cfg.jump_law, seed));
    const auto increments = jump_increments(set.jumps.back(), cfg.grid);
    set.dw.col(p) = set.brownian.back().increments;
    set.jump_raw.col(p) = increments.raw;
    set.jump_compensated.col(p) = increments.compensated;
    set.exact.col(p) =
        exact_path_on_grid(cfg, cfg.grid, set.brownian.back().cumulative(), set.jumps.back());
  }
  return set;
}

namespace detail {

/// Lower-triangular (diagonal included) constant-rate kernel matrix: entry
/// (i, j) equals `rate` for t_j <= t_i and 0 above the diagonal. This is the
/// quadrature image of K(t, s) = rate * 1{s <= t}.
inline Eigen::MatrixXd causal_rate_matrix(double rate, Eigen::Index n) {
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) kernel.row(i).head(i + 1).setConstant(rate);
  return kernel;
}

}  // namespace detail

/// Quadrature matrix of the true (compensated-drift) kernel on the config grid.
inline Eigen::MatrixXd true_kernel_matrix(const MertonConfig& cfg) {
  return detail::causal_rate_matrix(cfg.compensated_drift(), cfg.grid.n_nodes);
}

/// One application of the discretized Volterra operator to an ensemble:
///
///   out(i, p) = spot + dt * sum_j kernel(i, j) s(j, p)
///                    + sum_{j < i} s(j, p) (sigma dw(j, p) + jump(j, p)).
///
/// The stochastic sums are strictly below the diagonal (increment j reaches
/// node i only for j < i) so the iteration never anticipates its own noise.
/// Both the compensated and the raw-drift entry points funnel through this
/// one function, which is what makes them agree to the last bit.
inline Eigen::MatrixXd sfvnn_apply(double spot, double dt, double sigma,
                                   const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& dw,
                                   const Eigen::MatrixXd& jump, const Eigen::MatrixXd& s) {
  const Eigen::Index n = s.rows();
  const Eigen::Index p = s.cols();
  if (kernel.rows() != n || kernel.cols() != n)
    throw dimension_error("sfvnn_apply: kernel / state size mismatch");
  if (dw.rows() != n - 1 || dw.cols() != p || jump.rows() != n - 1 || jump.cols() != p)
    throw dimension_error("sfvnn_apply: increment / state size mismatch");
  Eigen::MatrixXd out = (dt * (kernel * s)).array() + spot;
  // Noise contribution of node j to every node above it: prefix sums of
  // s_j * (sigma dW_j + jump_j) down each column.
  Eigen::MatrixXd noise =
      s.topRows(n - 1).cwiseProduct(sigma * dw + jump);
  for (Eigen::Index c = 0; c < p; ++c) {
    double running = 0.0;
    for (Eigen::Index i = 1; i < n; ++i) {
      running += noise(i - 1, c);
      out(i, c) += running;
    }
  }
  return out;
}

/// Compensated route: true kernel mu~ 1{s <= t} with compensated jump
/// increments.
inline Eigen::MatrixXd sfvnn_apply_compensated(const MertonConfig& cfg,
                                               const MertonPathSet& paths,
                                               const Eigen::MatrixXd& s) {
  return sfvnn_apply(cfg.spot, cfg.grid.step(), cfg.sigma, true_kernel_matrix(cfg), paths.dw,
                     paths.jump_compensated, s);
}

/// Raw route: plain drift mu with uncompensated jump increments. Rewrites its
/// inputs into the compensated form with the same floating-point expressions
/// the sampler uses, then calls the shared core — so the two routes produce
/// bitwise-identical output.
inline Eigen::MatrixXd sfvnn_apply_uncompensated(const MertonConfig& cfg,
                                                 const MertonPathSet& paths,
                                                 const Eigen::MatrixXd& s) {
  const double excess_rate = cfg.intensity * cfg.jump_law.mean_excess();
  const Eigen::MatrixXd kernel =
      detail::causal_rate_matrix(cfg.drift + excess_rate, cfg.grid.n_nodes);
  const Eigen::MatrixXd jump =
      paths.jump_raw.array() - excess_rate * cfg.grid.step();
  return sfvnn_apply(cfg.spot, cfg.grid.step(), cfg.sigma, kernel, paths.dw, jump, s);
}

/// Mean over paths of the relative discrete-L2 gap between two ensembles.
inline double ensemble_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("ensemble_gap: shape mismatch");
  if (a.cols() == 0) throw config_error("ensemble_gap: empty ensemble");
  const double root_dt = std::sqrt(dt);
  double total = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double gap = root_dt * (a.col(c) - b.col(c)).norm();
    const double scale = std::max(root_dt * b.col(c).norm(), 1.0);
    total += gap / scale;
  }
  return total / static_cast<double>(a.cols());
}

/// Picard iteration with the true kernel from the flat start S == spot.
/// Converges superlinearly (Volterra structure), so the default iteration cap
/// is generous rather than tight.
inline Eigen::MatrixXd true_kernel_fixed_point(const MertonConfig& cfg,
                                               const MertonPathSet& paths,
                                               double tolerance = 1e-13,
                                               Eigen::Index max_iterations = 200) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(paths.nodes(), paths.paths(), cfg.spot);
  std::vector<double> residuals;
  for (Eigen::Index k = 0; k < max_iterations; ++k) {
    Eigen::MatrixXd next = sfvnn_apply_compensated(cfg, paths, s);
    if (!next.allFinite())
      throw divergence_error("true_kernel_fixed_point: non-finite iterate",
                             IterationTrace<double>{residuals, {}, k + 1, false});
    const double residual = ensemble_gap(next, s, cfg.grid.step());
    residuals.push_back(residual);
    s.swap(next);
    if (residual < tolerance) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Residual loss and SGD training for the learned kernel.
// ---------------------------------------------------------------------------

namespace detail {

/// Gather a set of columns of an ensemble into a dense block.
inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& s,
                                      const std::vector<Eigen::Index>& batch) {
  Eigen::MatrixXd out(s.rows(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b] < 0 || batch[b] >= s.cols())
      throw dimension_error("gather_columns: path index out of range");
    out.col(static_cast<Eigen::Index>(b)) = s.col(batch[b]);
  }
  return out;
}

/// Residuals R = S - T(S) for a batch of paths under an explicit kernel
/// matrix. Rows are grid nodes, columns the batch paths.
inline Eigen::MatrixXd batch_residual(const MertonConfig& cfg, const MertonPathSet& paths,
                                      const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& s,
                                      const std::vector<Eigen::Index>& batch) {
  const Eigen::MatrixXd s_b = gather_columns(s, batch);
  const Eigen::MatrixXd dw_b = gather_columns(paths.dw, batch);
  const Eigen::MatrixXd jump_b = gather_columns(paths.jump_compensated, batch);
  return s_b - sfvnn_apply(cfg.spot, cfg.grid.step(), cfg.sigma, kernel, dw_b, jump_b, s_b);
}

inline std::vector<Eigen::Index> all_columns(Eigen::Index count) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

}  // namespace detail

/// Monte-Carlo estimate of the expected squared equation residual,
/// E int_0^T |S - T_K(S)|^2 dt, over the given paths: mean over the batch of
/// dt * sum_i R_i^2. Takes an explicit kernel matrix; the NeuralKernel
/// overload below evaluates the network on the grid first.
inline double residual_loss(const MertonConfig& cfg, const MertonPathSet& paths,
                            const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& s,
                            const std::vector<Eigen::Index>& batch) {
  if (paths.paths() == 0 || s.cols() == 0) throw config_error("residual_loss: empty ensemble");
  if (batch.empty()) throw config_error("residual_loss: empty batch");
  const Eigen::MatrixXd residual = detail::batch_residual(cfg, paths, kernel, s, batch);
  return cfg.grid.step() * residual.squaredNorm() / static_cast<double>(batch.size());
}

inline double residual_loss(const NeuralKernel& net, const MertonConfig& cfg,
                            const MertonPathSet& paths, const Eigen::MatrixXd& s) {
  const Eigen::VectorXd nodes = cfg.grid.nodes();
  return residual_loss(cfg, paths, kernel_matrix(net, nodes, nodes), s,
                       detail::all_columns(s.cols()));
}

/// One SGD step on the residual loss over a minibatch of path indices,
/// holding the anchor ensemble fixed. Appends the pre-update loss to the
/// state's history and advances the global step counter. Throws
/// training_error (with a snapshot of the state) if the loss or gradient
/// stops being finite.
inline double train_step(NeuralKernel& net, TrainState& state, const MertonConfig& cfg,
                         const MertonPathSet& paths, const Eigen::MatrixXd& anchor,
                         const std::vector<Eigen::Index>& batch) {
  if (anchor.cols() != paths.paths() || anchor.rows() != paths.nodes())
    throw dimension_error("train_step: anchor / path set mismatch");
  if (batch.empty()) throw config_error("train_step: empty batch");
  const double dt = cfg.grid.step();
  const Eigen::VectorXd nodes = cfg.grid.nodes();
  const Eigen::MatrixXd kernel = kernel_matrix(net, nodes, nodes);
  const Eigen::MatrixXd residual = detail::batch_residual(cfg, paths, kernel, anchor, batch);
  const double loss = dt * residual.squaredNorm() / static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw training_error("train_step: non-finite loss", state);

  /*
   * dL/dK(a, b): the operator contributes -dt * K(i, j) s(j, p) to residual
   * (i, p), so with L = (dt / B) sum |R|^2,
   *
   *     dL/dK = -(2 dt^2 / B) R S_batch^T        (n x n, rank <= B),
   *
   * which backpropagates through the network evaluated at every grid pair.
   */
  const Eigen::MatrixXd anchor_b = detail::gather_columns(anchor, batch);
  const Eigen::MatrixXd d_kernel =
      (-2.0 * dt * dt / static_cast<double>(batch.size())) * (residual * anchor_b.transpose());
  const Eigen::VectorXd grad = parameter_gradient(net, nodes, nodes, d_kernel);
  if (!grad.allFinite()) throw training_error("train_step: non-finite gradient", state);

  sgd_update(net, grad, state.learning_rate);
  ++state.step;
  state.append_loss(loss);
  return loss;
}

// ---------------------------------------------------------------------------
// Outer solver loop.
// ---------------------------------------------------------------------------

/// Solver state for the learned-kernel run: the current ensemble iterate plus
/// the two convergence diagnostics the reports plot.
struct SfvnnState {
  Eigen::MatrixXd S;                  ///< n_nodes x P current iterate.
  Eigen::Index outer_k = 0;
  std::vector<double> fp_residuals;   ///< per-outer relative update size
  std::vector<double> nn_errors;      ///< per-outer gap to the true-kernel fixed point
};

/// One outer sweep S <- T_K(S) under an explicit kernel matrix. Appends the
/// relative update size; callers that track a reference solution append to
/// nn_errors themselves.
inline SfvnnState sfvnn_outer_iterate(SfvnnState state, const Eigen::MatrixXd& kernel,
                                      const MertonConfig& cfg, const MertonPathSet& paths,
                                      double divergence_limit = 1e12) {
  Eigen::MatrixXd next = sfvnn_apply(cfg.spot, cfg.grid.step(), cfg.sigma, kernel, paths.dw,
                                     paths.jump_compensated, state.S);
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > divergence_limit)
    throw divergence_error(
        "sfvnn_outer_iterate: iterate diverged",
        IterationTrace<double>{state.fp_residuals, {}, state.outer_k + 1, false});
  state.fp_residuals.push_back(ensemble_gap(next, state.S, cfg.grid.step()));
  state.S.swap(next);
  ++state.outer_k;
  return state;
}

inline SfvnnState sfvnn_outer_iterate(SfvnnState state, const NeuralKernel& net,
                                      const MertonConfig& cfg, const MertonPathSet& paths,
                                      double divergence_limit = 1e12) {
  const Eigen::VectorXd nodes = cfg.grid.nodes();
  return sfvnn_outer_iterate(std::move(state), kernel_matrix(net, nodes, nodes), cfg, paths,
                             divergence_limit);
}

/// Knobs for the end-to-end learned-kernel run.
struct SfvnnRunConfig {
  RandomSeed seed{20240803u, 0};
  Eigen::Index n_paths = 64;
  Eigen::Index train_sweeps = 12;      ///< random-restart rounds
  Eigen::Index steps_per_sweep = 1000;
  Eigen::Index batch_size = 16;
  double learning_rate = 1e-2;
  double init_gain = 4.0;              ///< uniform init half-width scale
  double tolerance = 1e-12;            ///< outer-loop stopping residual
  Eigen::Index max_outer = 20;
};

inline void validate(const SfvnnRunConfig& run) {
  if (run.n_paths < 1) throw config_error("sfvnn: need at least one path");
  if (run.train_sweeps < 1) throw config_error("sfvnn: need at least one training sweep");
  if (run.steps_per_sweep < 1) throw config_error("sfvnn: need at least one step per sweep");
  if (run.batch_size < 1) throw config_error("sfvnn: batch size must be >= 1");
  if (run.learning_rate < 0.0) throw config_error("sfvnn: learning rate must be >= 0");
  if (!(run.tolerance > 0.0)) throw config_error("sfvnn: tolerance must be > 0");
  if (run.max_outer < 1) throw config_error("sfvnn: need at least one outer iteration");
}

/// Everything the learned-kernel run produces: the final solver state, the
/// concatenated training trace, the kernel that won the restart tournament,
/// and the true-kernel fixed point used as the error reference.
struct SfvnnResult {
  SfvnnState state;
  TrainState train;
  NeuralKernel kernel;
  Eigen::Index chosen_sweep = 0;
  Eigen::MatrixXd reference;
  bool converged = false;
};

/// Full learned-kernel pipeline.
///
/// Training phase: `train_sweeps` random restarts, each running
/// `steps_per_sweep` SGD steps on minibatches of the frozen simulated
/// ensemble (training against the exact paths keeps the regression target
/// meaningful; iterating against a half-trained kernel's own output lets the
/// loss collapse without the kernel learning anything). The restart whose
/// end-of-sweep window-averaged loss is smallest wins.
///
/// Solve phase: plain outer iteration S <- T_K(S) from the flat start under
/// the frozen winning kernel, recording per-sweep residuals and the gap to
/// the true-kernel fixed point on the same noise.
inline SfvnnResult run_sfvnn(const MertonConfig& cfg, const SfvnnRunConfig& run) {
  validate(cfg);
  validate(run);

  SfvnnResult result;
  const MertonPathSet paths = make_path_set(cfg, run.seed, run.n_paths);
  const Eigen::VectorXd nodes = cfg.grid.nodes();

  // Training phase: restart tournament on the frozen ensemble.
  result.train.learning_rate = run.learning_rate;
  CounterRng batch_rng = CounterRng(run.seed).fork(substream::batch);
  double best_average = std::numeric_limits<double>::infinity();
  for (Eigen::Index sweep = 0; sweep < run.train_sweeps; ++sweep) {
    NeuralKernel net = reinitialized_kernel(run.seed, sweep, run.init_gain);
    net.set_normalization(cfg.grid.lower, cfg.grid.upper, cfg.grid.lower, cfg.grid.upper);
    result.train.sweep = sweep;
    for (Eigen::Index step = 0; step < run.steps_per_sweep; ++step) {
      std::vector<Eigen::Index> batch(static_cast<std::size_t>(run.batch_size));
      for (Eigen::Index b = 0; b < run.batch_size; ++b) {
        const std::uint64_t draw =
            static_cast<std::uint64_t>(result.train.step) * static_cast<std::uint64_t>(run.batch_size) +
            static_cast<std::uint64_t>(b);
        batch[static_cast<std::size_t>(b)] =
            static_cast<Eigen::Index>(batch_rng.uniform_index(draw, static_cast<std::uint64_t>(run.n_paths)));
      }
      train_step(net, result.train, cfg, paths, paths.exact, batch);
    }
    const double average = result.train.current_average();
    if (average < best_average) {
      best_average = average;
      result.kernel = net;
      result.chosen_sweep = sweep;
    }
  }

  // Solve phase: outer iteration under the frozen winner.
  result.reference = true_kernel_fixed_point(cfg, paths);
  const Eigen::MatrixXd kernel = kernel_matrix(result.kernel, nodes, nodes);
  result.state.S = Eigen::MatrixXd::Constant(paths.nodes(), paths.paths(), cfg.spot);
  for (Eigen::Index k = 0; k < run.max_outer; ++k) {
    result.state = sfvnn_outer_iterate(std::move(result.state), kernel, cfg, paths);
    result.state.nn_errors.push_back(
        ensemble_gap(result.state.S, result.reference, cfg.grid.step()));
    if (result.state.fp_residuals.back() < run.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Discretization-order study helpers.
// ---------------------------------------------------------------------------

/// Explicit Euler recursion for the compensated dynamics on `grid`, driven by
/// externally supplied increments so refinement studies can coarsen one fine
/// sample instead of re-drawing noise per resolution:
///
///   S_{i+1} = S_i (1 + mu~ dt + sigma dW_i + dN~_i).
inline Eigen::VectorXd euler_path(const MertonConfig& cfg, const Grid<double>& grid,
                                  const Eigen::VectorXd& dw, const Eigen::VectorXd& cjump) {
  const Eigen::Index n = grid.n_nodes;
  if (dw.size() != n - 1 || cjump.size() != n - 1)
    throw dimension_error("euler_path: increment / grid mismatch");
  const double dt = grid.step();
  const double rate = cfg.compensated_drift();
  Eigen::VectorXd out(n);
  out[0] = cfg.spot;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    out[i + 1] = out[i] * (1.0 + rate * dt + cfg.sigma * dw[i] + cjump[i]);
  return out;
}

}  // namespace sfie

#endif  // SFIE_MERTON_HPP
