#ifndef SFIE_GRID_HPP
#define SFIE_GRID_HPP

#include <Eigen/Core>

#include "sfie/errors.hpp"

namespace sfie {

/// Uniform time grid with nodes t_i = lower + i * step(), i = 0..n_nodes-1.
/// Both endpoints are nodes; there are n_nodes - 1 intervals of width step().
template <typename Scalar = double>
struct Grid {
  Scalar lower = Scalar(0);
  Scalar upper = Scalar(1);
  Eigen::Index n_nodes = 2;

  Scalar step() const { return (upper - lower) / Scalar(n_nodes - 1); }
  Eigen::Index intervals() const { return n_nodes - 1; }
  Scalar node(Eigen::Index i) const { return lower + Scalar(i) * step(); }
  Scalar length() const { return upper - lower; }
  bool contains(Scalar t) const { return t >= lower && t <= upper; }

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n_nodes);
    for (Eigen::Index i = 0; i < n_nodes; ++i) out[i] = node(i);
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using GridD = Grid<double>;

/// Validating factory: requires upper > lower and at least two nodes.
template <typename Scalar>
Grid<Scalar> make_grid(Scalar lower, Scalar upper, Eigen::Index n_nodes) {
  if (!(upper > lower)) throw config_error("grid: upper bound must exceed lower bound");
  if (n_nodes < 2) throw config_error("grid: need at least 2 nodes");
  return Grid<Scalar>{lower, upper, n_nodes};
}

inline GridD make_grid(double lower, double upper, Eigen::Index n_nodes) {
  return make_grid<double>(lower, upper, n_nodes);
}

}  // namespace sfie

#endif  // SFIE_GRID_HPP
