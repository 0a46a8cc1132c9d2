#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfie/discretization.hpp"
#include "sfie/grid.hpp"
#include "sfie/paths.hpp"
#include "sfie/rng.hpp"

using namespace sfie;

namespace {
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
}  // namespace

TEST_CASE("counter rng is a pure function of seed and index") {
  const CounterRng a(RandomSeed{42, 7});
  const CounterRng b(RandomSeed{42, 7});
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(a.bits(i) == b.bits(i));
    CHECK(a.uniform(i) == b.uniform(i));
  }
}

TEST_CASE("distinct streams and forks decorrelate") {
  const CounterRng a(RandomSeed{42, 0});
  const CounterRng b(RandomSeed{42, 1});
  const CounterRng c(RandomSeed{43, 0});
  int same_ab = 0, same_ac = 0;
  for (std::uint64_t i = 0; i < 64; ++i) {
    same_ab += a.bits(i) == b.bits(i);
    same_ac += a.bits(i) == c.bits(i);
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);

  const CounterRng f1 = a.fork(substream::brownian);
  const CounterRng f2 = a.fork(substream::jump_count);
  int same_forks = 0;
  for (std::uint64_t i = 0; i < 64; ++i) same_forks += f1.bits(i) == f2.bits(i);
  CHECK(same_forks == 0);
  // Forking is also deterministic.
  CHECK(a.fork(substream::brownian).bits(3) == f1.bits(3));
}

TEST_CASE("uniform draws live strictly inside (0,1)") {
  const CounterRng rng(RandomSeed{7, 0});
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const double u = rng.uniform(i);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("uniform_index stays in range and covers it") {
  const CounterRng rng(RandomSeed{11, 0});
  std::array<int, 10> counts{};
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const std::uint64_t k = rng.uniform_index(i, 10);
    REQUIRE(k < 10);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int c : counts) CHECK(c > 300);  // each bucket near 500
}

TEST_CASE("inverse normal CDF round-trips through erfc") {
  // Compare in whichever tail is well conditioned: CDF below the median,
  // survival function above it.
  for (double p : {1e-12, 1e-6, 1e-3, 0.01, 0.2, 0.499}) {
    const double z = CounterRng::normal_icdf(p);
    CHECK(normal_cdf(z) / p == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (double p : {0.501, 0.8, 0.99, 1.0 - 1e-6, 1.0 - 1e-12}) {
    const double z = CounterRng::normal_icdf(p);
    const double survival = 0.5 * std::erfc(z / std::numbers::sqrt2);
    CHECK(survival / (1.0 - p) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(std::abs(CounterRng::normal_icdf(0.5)) < 1e-15);
  // Symmetry.
  CHECK(CounterRng::normal_icdf(0.025) == doctest::Approx(-CounterRng::normal_icdf(0.975)).epsilon(1e-12));
}

TEST_CASE("normal draws have standard moments") {
  const CounterRng rng(RandomSeed{3, 0});
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double z = rng.normal(i);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("brownian sampling matches the grid and is reproducible") {
  const GridD grid = make_grid(0.0, 2.0, 201);
  const BrownianPathD p1 = sample_brownian(grid, RandomSeed{9, 4});
  const BrownianPathD p2 = sample_brownian(grid, RandomSeed{9, 4});
  REQUIRE(p1.increments.size() == grid.intervals());
  CHECK(p1.increments == p2.increments);  // bitwise

  const Eigen::VectorXd w = p1.cumulative();
  REQUIRE(w.size() == grid.n_nodes);
  CHECK(w[0] == 0.0);
  for (Eigen::Index i = 1; i < grid.n_nodes; ++i)
    CHECK(w[i] == w[i - 1] + p1.increments[i - 1]);
}

TEST_CASE("brownian increments have variance dt") {
  const GridD grid = make_grid(0.0, 1.0, 10001);
  const BrownianPathD path = sample_brownian(grid, RandomSeed{123, 0});
  const double dt = grid.step();
  const double var = path.increments.squaredNorm() / static_cast<double>(path.increments.size());
  CHECK(var == doctest::Approx(dt).epsilon(0.05));
}

TEST_CASE("coarsening a brownian path preserves the motion") {
  const GridD fine_grid = make_grid(0.0, 1.0, 17);
  const BrownianPathD fine = sample_brownian(fine_grid, RandomSeed{5, 0});
  const BrownianPathD coarse = coarsen(fine, 4);
  REQUIRE(coarse.grid.n_nodes == 5);
  const Eigen::VectorXd wf = fine.cumulative();
  const Eigen::VectorXd wc = coarse.cumulative();
  for (Eigen::Index j = 0; j < coarse.grid.n_nodes; ++j)
    CHECK(wc[j] == doctest::Approx(wf[j * 4]).epsilon(1e-13));
  CHECK_THROWS_AS((void)coarsen(fine, 5), dimension_error);
}

TEST_CASE("discretization error estimate is zero for a grid-exact solver") {
  // The "solver" reports t^2 at the nodes, which both resolutions agree on.
  const auto solve = [](const GridD& grid, const BrownianPathD&) {
    Eigen::VectorXd y(grid.n_nodes);
    for (Eigen::Index i = 0; i < grid.n_nodes; ++i) y[i] = grid.node(i) * grid.node(i);
    return y;
  };
  const double err =
      estimate_discretization_error(solve, make_grid(0.0, 1.0, 9), 4, 3, RandomSeed{1, 0});
  CHECK(err == 0.0);

  // A solver that reads the path end is refinement-sensitive only through the
  // shared motion, so it also agrees exactly.
  const auto solve_w = [](const GridD& grid, const BrownianPathD& path) {
    const Eigen::VectorXd w = path.cumulative();
    Eigen::VectorXd y(grid.n_nodes);
    for (Eigen::Index i = 0; i < grid.n_nodes; ++i) y[i] = w[i];
    return y;
  };
  const double err_w =
      estimate_discretization_error(solve_w, make_grid(0.0, 1.0, 9), 4, 3, RandomSeed{1, 0});
  CHECK(err_w < 1e-14);
}

TEST_CASE("lognormal law moments") {
  const LogNormalParams law{-0.1, 0.15};
  CHECK(law.mean() == doctest::Approx(std::exp(-0.1 + 0.5 * 0.15 * 0.15)).epsilon(1e-15));
  CHECK(law.mean_excess() == doctest::Approx(law.mean() - 1.0).epsilon(1e-15));
}

TEST_CASE("jump sampling bookkeeping") {
  const LogNormalParams law{-0.1, 0.15};

  SUBCASE("zero intensity produces no jumps") {
    const JumpPathD path = sample_jumps(1.0, 0.0, law, RandomSeed{2, 0});
    CHECK(path.jump_times.empty());
    CHECK(path.compensator_drift == 0.0);
  }

  SUBCASE("times are sorted inside (0, horizon] and multipliers positive") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const JumpPathD path = sample_jumps(2.0, 3.0, law, RandomSeed{s, 1});
      REQUIRE(path.multipliers.size() == path.jump_times.size());
      for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
        CHECK(path.jump_times[k] > 0.0);
        CHECK(path.jump_times[k] <= 2.0);
        if (k > 0) CHECK(path.jump_times[k] > path.jump_times[k - 1]);
        CHECK(path.multipliers[k] > 0.0);
      }
    }
  }

  SUBCASE("jump counts average to intensity * horizon") {
    double total = 0.0;
    const int trials = 4000;
    for (std::uint64_t s = 0; s < trials; ++s)
      total += static_cast<double>(sample_jumps(1.5, 2.0, law, RandomSeed{s, 2}).jump_times.size());
    const double mean = total / trials;  // expect 3, sd sqrt(3)/sqrt(trials)
    CHECK(mean == doctest::Approx(3.0).epsilon(0.05));
  }

  SUBCASE("compensator drift matches the law") {
    const JumpPathD path = sample_jumps(1.0, 2.5, law, RandomSeed{4, 0});
    CHECK(path.compensator_drift == 2.5 * law.mean_excess());
    CHECK(path.mean_excess() == law.mean_excess());
  }
}

TEST_CASE("poisson inversion hits the textbook median") {
  // For mean 3: P(X <= 2) ~ 0.423, P(X <= 3) ~ 0.647, so u = 0.5 maps to 3.
  CHECK(detail::poisson_icdf(3.0, 0.5) == 3);
  CHECK(detail::poisson_icdf(3.0, 0.42) == 2);
  CHECK(detail::poisson_icdf(0.0, 0.99) == 0);
  // Monotone in u.
  std::int64_t prev = 0;
  for (double u = 0.05; u < 1.0; u += 0.05) {
    const std::int64_t k = detail::poisson_icdf(3.0, u);
    CHECK(k >= prev);
    prev = k;
  }
}

TEST_CASE("interval jump sums land on the left node of their interval") {
  // One jump of size J = 2 at t = 0.3 on a 5-node grid over [0,1]:
  // interval (0.25, 0.5] belongs to node 1.
  JumpPathD path;
  path.jump_times = {0.3};
  path.multipliers = {2.0};
  path.horizon = 1.0;
  path.intensity = 2.0;
  path.compensator_drift = 2.0 * 0.1;
  const GridD grid = make_grid(0.0, 1.0, 5);
  const auto inc = jump_increments(path, grid);
  REQUIRE(inc.raw.size() == 4);
  CHECK(inc.raw[0] == 0.0);
  CHECK(inc.raw[1] == 1.0);
  CHECK(inc.raw[2] == 0.0);
  CHECK(inc.raw[3] == 0.0);
  // Compensation subtracts exactly compensator_drift * dt from every interval.
  for (Eigen::Index j = 0; j < 4; ++j)
    CHECK(inc.compensated[j] == inc.raw[j] - path.compensator_drift * grid.step());
}

TEST_CASE("a jump exactly on a node belongs to the interval ending there") {
  JumpPathD path;
  path.jump_times = {0.25};
  path.multipliers = {3.0};
  path.horizon = 1.0;
  path.intensity = 1.0;
  path.compensator_drift = 0.0;
  const GridD grid = make_grid(0.0, 1.0, 5);
  const auto inc = jump_increments(path, grid);
  CHECK(inc.raw[0] == 2.0);  // (0, 0.25] -> node 0
  CHECK(inc.raw[1] == 0.0);
}

TEST_CASE("interval sums accumulate multiple jumps") {
  JumpPathD path;
  path.jump_times = {0.26, 0.3, 0.49};
  path.multipliers = {2.0, 1.5, 0.5};
  path.horizon = 1.0;
  path.intensity = 1.0;
  path.compensator_drift = 0.0;
  const GridD grid = make_grid(0.0, 1.0, 5);
  const auto inc = jump_increments(path, grid);
  CHECK(inc.raw[1] == doctest::Approx(1.0 + 0.5 - 0.5).epsilon(1e-15));
  CHECK(inc.raw[0] == 0.0);
  CHECK(inc.raw[2] == 0.0);
}
