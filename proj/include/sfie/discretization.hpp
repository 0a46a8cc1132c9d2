#ifndef SFIE_DISCRETIZATION_HPP
#define SFIE_DISCRETIZATION_HPP

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

#include "sfie/errors.hpp"
#include "sfie/grid.hpp"
#include "sfie/paths.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/// Aggregates a fine Brownian path onto a grid coarser by an integer factor:
/// coarse increment j is the sum of the `factor` fine increments it spans, so
/// the two paths describe the same Brownian motion sampled at two rates.
template <typename Scalar>
BrownianPath<Scalar> coarsen(const BrownianPath<Scalar>& fine, Eigen::Index factor) {
  if (factor < 1) throw config_error("coarsen: refinement factor must be >= 1");
  if (fine.grid.intervals() % factor != 0)
    throw dimension_error("coarsen: fine interval count is not a multiple of the factor");
  const Eigen::Index coarse_intervals = fine.grid.intervals() / factor;
  BrownianPath<Scalar> coarse;
  coarse.grid = Grid<Scalar>{fine.grid.lower, fine.grid.upper, coarse_intervals + 1};
  coarse.increments.setZero(coarse_intervals);
  for (Eigen::Index j = 0; j < coarse_intervals; ++j)
    coarse.increments[j] = fine.increments.segment(j * factor, factor).sum();
  return coarse;
}

/// Monte-Carlo estimate of the discretization error constant: solves the
/// same pathwise problem on a coarse grid and on a `refinement`-times finer
/// grid driven by the identical Brownian motion, and returns the RMS gap
/// between the two solutions at the coarse nodes, averaged over paths and
/// nodes. `solve(grid, path)` must return the solution values on the grid's
/// nodes.
template <typename Scalar, typename Solver>
Scalar estimate_discretization_error(Solver&& solve, const Grid<Scalar>& coarse_grid,
                                     Eigen::Index refinement, Eigen::Index n_paths,
                                     RandomSeed seed) {
  if (refinement < 2) throw config_error("estimate_discretization_error: refinement must be >= 2");
  if (n_paths < 1) throw config_error("estimate_discretization_error: need at least one path");

  const Grid<Scalar> fine_grid{coarse_grid.lower, coarse_grid.upper,
                               coarse_grid.intervals() * refinement + 1};
  Scalar sum_sq = Scalar(0);
  for (Eigen::Index p = 0; p < n_paths; ++p) {
    const BrownianPath<Scalar> fine =
        sample_brownian(fine_grid, RandomSeed{seed.seed, seed.stream_id + static_cast<std::uint64_t>(p)});
    const BrownianPath<Scalar> coarse = coarsen(fine, refinement);

    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y_fine = solve(fine_grid, fine);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y_coarse = solve(coarse.grid, coarse);
    if (y_fine.size() != fine_grid.n_nodes || y_coarse.size() != coarse.grid.n_nodes)
      throw dimension_error("estimate_discretization_error: solver returned wrong-size vector");

    for (Eigen::Index j = 0; j < coarse.grid.n_nodes; ++j) {
      const Scalar gap = y_fine[j * refinement] - y_coarse[j];
      sum_sq += gap * gap;
    }
  }
  return std::sqrt(sum_sq / static_cast<Scalar>(n_paths * coarse_grid.n_nodes));
}

}  // namespace sfie

#endif  // SFIE_DISCRETIZATION_HPP
