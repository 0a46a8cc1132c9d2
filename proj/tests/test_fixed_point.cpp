#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sfie/assemble.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/networks.hpp"
#include "sfie/rng.hpp"
#include "sfie/spectral.hpp"

using namespace sfie;

namespace {

/// Deterministic dense test matrix with entries in [-1, 1].
Eigen::MatrixXd random_matrix(Eigen::Index n, std::uint64_t seed) {
  const CounterRng rng(RandomSeed{seed, 0});
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = 2.0 * rng.uniform(static_cast<std::uint64_t>(i * n + j)) - 1.0;
  return m;
}

/// Same matrix rescaled so its operator 2-norm equals `target`.
Eigen::MatrixXd scaled_to_norm(Eigen::Index n, std::uint64_t seed, double target) {
  Eigen::MatrixXd m = random_matrix(n, seed);
  const double top = m.jacobiSvd().singularValues()[0];
  return m * (target / top);
}

}  // namespace

TEST_CASE("grid norms") {
  Eigen::VectorXd v(2);
  v << 3.0, -4.0;
  CHECK(grid_norm(v, NormKind::DiscreteL2, 0.25) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(grid_norm(v, NormKind::Sup, 0.25) == 4.0);
}

TEST_CASE("kappa schedules validate and report averaging") {
  CHECK_THROWS_AS((void)KappaScheduleD::constant(0.0), config_error);
  CHECK_THROWS_AS((void)KappaScheduleD::constant(1.5), config_error);
  CHECK_THROWS_AS((void)KappaScheduleD::custom(nullptr), config_error);

  const KappaScheduleD half = KappaScheduleD::constant(0.5);
  CHECK(half.at(0) == 0.5);
  CHECK(half.at(999) == 0.5);
  CHECK(half.always_averages());

  const KappaScheduleD plain = KappaScheduleD::constant(1.0);
  CHECK_FALSE(plain.always_averages());

  const KappaScheduleD bad = KappaScheduleD::custom([](Eigen::Index) { return 2.0; });
  CHECK_THROWS_AS((void)bad.at(0), config_error);

  const KappaScheduleD empty{};  // no schedule means plain kappa = 1
  CHECK(empty.at(7) == 1.0);
}

TEST_CASE("iteration converges to the direct linear solve") {
  const Eigen::Index n = 8;
  const Eigen::MatrixXd w = scaled_to_norm(n, 42, 0.6);
  Eigen::VectorXd b(n);
  const CounterRng rng(RandomSeed{7, 1});
  for (Eigen::Index i = 0; i < n; ++i) b[i] = rng.normal(static_cast<std::uint64_t>(i));

  const Eigen::VectorXd exact =
      Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(n, n) - w).solve(b);

  FixedPointConfigD cfg;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 2000;
  const auto op = [&](const Eigen::VectorXd& y) { return (w * y + b).eval(); };
  const auto [y, trace] = iterate<double>(op, b, cfg);

  CHECK(trace.converged);
  CHECK((y - exact).norm() <= 1e-10 * exact.norm());
  REQUIRE(trace.residuals.size() >= 2);
  CHECK(trace.ratio_estimates.size() == trace.residuals.size() - 1);
  CHECK(trace.ratio_estimates.back() < 1.0);
  CHECK(trace.iterations_used == static_cast<Eigen::Index>(trace.residuals.size()));
}

TEST_CASE("plain iteration reproduces the unrolled network bit for bit") {
  const GridD grid = make_grid(0.0, 1.0, 9);
  KernelSpecD spec;
  spec.deterministic_kernel = [](double t, double s) { return 0.3 * std::cos(t + s); };
  spec.forcing = [](double t) { return 1.0 + t; };
  const LinearSFNND net = make_linear_sfnn(grid, spec, nullptr, 1.0, 8);

  const Eigen::VectorXd unrolled = run_linear(net);

  FixedPointConfigD cfg;
  cfg.tolerance = 1e-300;  // never met: force exactly max_iterations sweeps
  cfg.max_iterations = 8;
  cfg.dt = grid.step();
  const auto op = [&](const Eigen::VectorXd& y) {
    return (net.layer.W * y + net.layer.b).eval();
  };
  const auto [swept, trace] = iterate<double>(op, net.layer.b, cfg);

  REQUIRE(swept.size() == unrolled.size());
  for (Eigen::Index i = 0; i < swept.size(); ++i) CHECK(swept[i] == unrolled[i]);
  CHECK(trace.iterations_used == 8);
}

TEST_CASE("relaxed iteration matches a hand-written averaging loop bit for bit") {
  const Eigen::Index n = 6;
  const Eigen::MatrixXd w = scaled_to_norm(n, 3, 0.9);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0);
  const auto op = [&](const Eigen::VectorXd& y) { return (w * y + b).eval(); };

  FixedPointConfigD cfg;
  cfg.kappa = KappaScheduleD::constant(0.5);
  cfg.tolerance = 1e-300;
  cfg.max_iterations = 12;
  const auto [swept, trace] = iterate<double>(op, b, cfg);

  Eigen::VectorXd y = b;
  for (int m = 0; m < 12; ++m) {
    const Eigen::VectorXd sy = op(y);
    y = ((1.0 - 0.5) * y + 0.5 * sy).eval();
  }
  for (Eigen::Index i = 0; i < n; ++i) CHECK(swept[i] == y[i]);
}

TEST_CASE("divergence raises an error carrying the partial trace") {
  const Eigen::Index n = 4;
  const Eigen::MatrixXd w = 2.0 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
  const auto op = [&](const Eigen::VectorXd& y) { return (w * y + b).eval(); };

  FixedPointConfigD cfg;
  cfg.divergence_limit = 1e3;
  try {
    (void)iterate<double>(op, b, cfg);
    FAIL("expected divergence_error");
  } catch (const divergence_error& e) {
    CHECK_FALSE(e.trace().residuals.empty());
    CHECK(e.trace().iterations_used >= 1);
    CHECK_FALSE(e.trace().converged);
  }
}

TEST_CASE("iteration validates its configuration") {
  const auto op = [](const Eigen::VectorXd& y) { return y; };
  FixedPointConfigD cfg;
  cfg.tolerance = 0.0;
  CHECK_THROWS_AS((void)iterate<double>(op, Eigen::VectorXd::Ones(3), cfg), config_error);
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 0;
  CHECK_THROWS_AS((void)iterate<double>(op, Eigen::VectorXd::Ones(3), cfg), config_error);

  const auto shrink = [](const Eigen::VectorXd& y) { return y.head(2).eval(); };
  FixedPointConfigD ok;
  CHECK_THROWS_AS((void)iterate<double>(shrink, Eigen::VectorXd::Ones(3), ok), dimension_error);
}

TEST_CASE("prescribed depth solves the a-priori bound") {
  CHECK(prescribe_depth(0.5, 1e-6, 1.0, 0.0) == 21);
  // Verify against the bound directly: 21 sweeps suffice, 20 do not.
  CHECK(error_bound_report(0.5, 21, 1.0, 0.0).bound <= 1e-6);
  CHECK(error_bound_report(0.5, 20, 1.0, 0.0).bound > 1e-6);

  // Tighter targets need more depth; a trivial target needs none.
  CHECK(prescribe_depth(0.5, 1e-9, 1.0, 0.0) > prescribe_depth(0.5, 1e-6, 1.0, 0.0));
  CHECK(prescribe_depth(0.5, 1e6, 1.0, 0.0) == 1);
  CHECK(prescribe_depth(0.5, 1e-6, 0.0, 0.0) == 1);

  CHECK_THROWS_AS((void)prescribe_depth(1.0, 1e-6, 1.0, 0.0), config_error);
  CHECK_THROWS_AS((void)prescribe_depth(0.0, 1e-6, 1.0, 0.0), config_error);
  CHECK_THROWS_AS((void)prescribe_depth(0.5, 0.0, 1.0, 0.0), config_error);
  CHECK_THROWS_AS((void)prescribe_depth(0.5, 1e-6, -1.0, 0.0), config_error);
}

TEST_CASE("error bound report evaluates the geometric bound") {
  const ErrorBoundReportD report = error_bound_report(0.5, 3, 0.2, 0.3);
  CHECK(report.contraction == 0.5);
  CHECK(report.depth == 3);
  CHECK(report.bound == doctest::Approx(0.125 / 0.5 * 0.5).epsilon(1e-15));
  CHECK_THROWS_AS((void)error_bound_report(0.5, 0, 0.2, 0.3), config_error);
  CHECK_THROWS_AS((void)error_bound_report(1.5, 3, 0.2, 0.3), config_error);
}

TEST_CASE("empirical contraction estimate stays below the operator norm") {
  const Eigen::Index n = 12;
  const Eigen::MatrixXd w = scaled_to_norm(n, 11, 0.6);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 0.7);
  const auto op = [&](const Eigen::VectorXd& y) { return (w * y + b).eval(); };

  const double estimate = estimate_contraction<double>(op, n, 40, RandomSeed{9, 0});
  CHECK(estimate <= 0.6 + 1e-12);
  CHECK(estimate > 0.1);  // probes in 12 dimensions should see a decent share of the norm

  CHECK_THROWS_AS((void)estimate_contraction<double>(op, 0, 4, RandomSeed{9, 0}), config_error);
  CHECK_THROWS_AS((void)estimate_contraction<double>(op, n, 0, RandomSeed{9, 0}), config_error);
}

TEST_CASE("power iteration estimates spectral radii") {
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
  diag(0, 0) = 0.3;
  diag(1, 1) = -0.9;
  diag(2, 2) = 0.5;
  const SpectralEstimateD d = spectral_radius(diag);
  CHECK(d.converged);
  CHECK(d.value == doctest::Approx(0.9).epsilon(1e-6));

  const SpectralEstimateD zero = spectral_radius(Eigen::MatrixXd::Zero(4, 4).eval());
  CHECK(zero.converged);
  CHECK(zero.value == 0.0);

  Eigen::MatrixXd sym(2, 2);
  sym << 2.0, 1.0, 1.0, 2.0;  // eigenvalues 3 and 1
  CHECK(spectral_radius(sym).value == doctest::Approx(3.0).epsilon(1e-6));

  CHECK_THROWS_AS((void)spectral_radius(Eigen::MatrixXd::Zero(2, 3).eval()), dimension_error);
  CHECK_THROWS_AS((void)spectral_radius(Eigen::MatrixXd().eval()), dimension_error);
}
