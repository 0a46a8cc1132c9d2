#ifndef SFIE_PATHS_HPP
#define SFIE_PATHS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/grid.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/// Brownian increments on a grid: increments[j] = W(t_{j+1}) - W(t_j) spans
/// the j-th interval, so there are grid.intervals() of them. The node at the
/// right endpoint of the grid carries no increment.
template <typename Scalar = double>
struct BrownianPath {
  Grid<Scalar> grid;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> increments;

  /// W(t_i) reconstructed by prefix-summing the increments; W(t_0) = 0.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cumulative() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(grid.n_nodes);
    w[0] = Scalar(0);
    for (Eigen::Index i = 1; i < grid.n_nodes; ++i) w[i] = w[i - 1] + increments[i - 1];
    return w;
  }
};

using BrownianPathD = BrownianPath<double>;

/// Samples increments ~ N(0, step). Draw j depends only on (seed, j), so the
/// same (seed, stream_id) always yields the identical path, in any order.
template <typename Scalar>
BrownianPath<Scalar> sample_brownian(const Grid<Scalar>& grid, RandomSeed seed) {
  if (grid.intervals() < 1) throw config_error("sample_brownian: grid has no intervals");
  const Scalar sqrt_dt = std::sqrt(grid.step());
  const CounterRng rng = CounterRng(seed).fork(substream::brownian);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inc(grid.intervals());
  for (Eigen::Index j = 0; j < grid.intervals(); ++j)
    inc[j] = sqrt_dt * static_cast<Scalar>(rng.normal(static_cast<std::uint64_t>(j)));
  return BrownianPath<Scalar>{grid, std::move(inc)};
}

inline BrownianPathD sample_brownian(const GridD& grid, RandomSeed seed) {
  return sample_brownian<double>(grid, seed);
}

/// Log-normal jump multiplier law: J = exp(mean_log + sd_log * Z).
struct LogNormalParams {
  double mean_log = 0.0;
  double sd_log = 0.0;

  double mean() const { return std::exp(mean_log + 0.5 * sd_log * sd_log); }
  double mean_excess() const { return mean() - 1.0; }  // E[J - 1]
};

/// Compound-Poisson jump path on [0, horizon]: event times with their
/// multiplicative marks, plus the drift lambda * E[J-1] that compensates the
/// jump integral.
template <typename Scalar = double>
struct JumpPath {
  std::vector<Scalar> jump_times;   // strictly increasing, in (0, horizon]
  std::vector<Scalar> multipliers;  // J_k > 0, same length as jump_times
  Scalar horizon = Scalar(1);
  Scalar intensity = Scalar(0);
  Scalar compensator_drift = Scalar(0);  // intensity * (E[J] - 1)

  Scalar mean_excess() const {  // E[J - 1]
    return intensity > Scalar(0) ? compensator_drift / intensity : Scalar(0);
  }
};

using JumpPathD = JumpPath<double>;

namespace detail {

/// Poisson quantile by CDF inversion (sequential search). Adequate for the
/// moderate means used here; falls back to a normal approximation when the
/// term-by-term recursion would underflow.
inline std::int64_t poisson_icdf(double mean, double u) {
  if (mean <= 0.0) return 0;
  if (mean > 700.0) {
    const double z = CounterRng::normal_icdf(u);
    const double k = mean + std::sqrt(mean) * z;
    return k > 0.0 ? static_cast<std::int64_t>(std::llround(k)) : 0;
  }
  double p = std::exp(-mean);
  double cdf = p;
  std::int64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p == 0.0) break;  // exhausted double precision mass
  }
  return k;
}

}  // namespace detail

/// Samples a compound-Poisson path: count ~ Poisson(lambda*T), event times
/// uniform on (0,T] (sorted), multipliers log-normal. Count, times and
/// multipliers use separate substreams so each part is reproducible on its
/// own.
template <typename Scalar>
JumpPath<Scalar> sample_jumps(Scalar horizon, Scalar intensity, const LogNormalParams& law,
                              RandomSeed seed) {
  if (intensity < Scalar(0)) throw config_error("sample_jumps: intensity must be >= 0");
  if (!(horizon > Scalar(0))) throw config_error("sample_jumps: horizon must be > 0");

  JumpPath<Scalar> path;
  path.horizon = horizon;
  path.intensity = intensity;
  path.compensator_drift = intensity * static_cast<Scalar>(law.mean_excess());

  const CounterRng base(seed);
  const double mean_count = static_cast<double>(intensity) * static_cast<double>(horizon);
  const std::int64_t count =
      detail::poisson_icdf(mean_count, base.fork(substream::jump_count).uniform(0));
  if (count <= 0) return path;

  const CounterRng time_rng = base.fork(substream::jump_times);
  const CounterRng mult_rng = base.fork(substream::jump_multipliers);
  path.jump_times.resize(static_cast<std::size_t>(count));
  path.multipliers.resize(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k)
    path.jump_times[static_cast<std::size_t>(k)] =
        horizon * static_cast<Scalar>(time_rng.uniform(static_cast<std::uint64_t>(k)));
  std::sort(path.jump_times.begin(), path.jump_times.end());
  // Ties have probability zero; nudge any exact duplicate so times are
  // strictly increasing.
  for (std::size_t k = 1; k < path.jump_times.size(); ++k)
    if (!(path.jump_times[k] > path.jump_times[k - 1]))
      path.jump_times[k] = std::nextafter(path.jump_times[k - 1], horizon * Scalar(2));
  for (std::int64_t k = 0; k < count; ++k)
    path.multipliers[static_cast<std::size_t>(k)] =
        std::exp(static_cast<Scalar>(law.mean_log) +
                 static_cast<Scalar>(law.sd_log) *
                     static_cast<Scalar>(mult_rng.normal(static_cast<std::uint64_t>(k))));
  return path;
}

inline JumpPathD sample_jumps(double horizon, double intensity, const LogNormalParams& law,
                              RandomSeed seed) {
  return sample_jumps<double>(horizon, intensity, law, seed);
}

/// Per-interval jump sums on a grid, assigned to the left node of each
/// interval: raw[j] = sum of (J_k - 1) over jumps in (t_j, t_{j+1}], and
/// compensated[j] = raw[j] - lambda * E[J-1] * dt, which has mean zero.
template <typename Scalar>
struct JumpIncrements {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> raw;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> compensated;
};

template <typename Scalar>
JumpIncrements<Scalar> jump_increments(const JumpPath<Scalar>& path, const Grid<Scalar>& grid) {
  if (grid.intervals() < 1) throw config_error("jump_increments: grid has no intervals");
  JumpIncrements<Scalar> out;
  out.raw = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(grid.intervals());
  for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
    const Scalar tau = path.jump_times[k];
    if (tau <= grid.lower || tau > grid.upper) continue;
    // Interval index j with t_j < tau <= t_{j+1}.
    Eigen::Index j = static_cast<Eigen::Index>(std::ceil((tau - grid.lower) / grid.step())) - 1;
    j = std::clamp<Eigen::Index>(j, 0, grid.intervals() - 1);
    out.raw[j] += path.multipliers[k] - Scalar(1);
  }
  const Scalar comp = path.compensator_drift * grid.step();
  out.compensated = out.raw.array() - comp;
  return out;
}

}  // namespace sfie

#endif  // SFIE_PATHS_HPP
