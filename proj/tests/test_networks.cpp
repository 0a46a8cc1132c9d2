#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/networks.hpp"
#include "sfie/paths.hpp"

using namespace sfie;

TEST_CASE("activations are evaluated pointwise and stay 1-Lipschitz") {
  Eigen::VectorXd x(3);
  x << -30.0, 0.0, 2.0;
  const Eigen::VectorXd id = apply_activation(Activation::Identity, x);
  CHECK(id == x);
  const Eigen::VectorXd th = apply_activation(Activation::Tanh, x);
  CHECK(th[1] == 0.0);
  CHECK(th[2] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
  const Eigen::VectorXd sp = apply_activation(Activation::Softplus, x);
  CHECK(sp[0] == doctest::Approx(std::log1p(std::exp(-30.0))).epsilon(1e-12));
  CHECK(sp[1] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(sp[2] == doctest::Approx(std::log1p(std::exp(2.0))).epsilon(1e-14));
  CHECK(activation_lipschitz<double>(Activation::Tanh) == 1.0);
}

TEST_CASE("unrolled network equals a hand-written sweep loop bit for bit") {
  const GridD grid = make_grid(0.0, 1.0, 9);
  const BrownianPathD path = sample_brownian(grid, RandomSeed{31, 0});
  KernelSpecD spec;
  spec.deterministic_kernel = [](double t, double s) { return 0.2 * std::cos(t + s); };
  spec.stochastic_kernel = [](double t, double s) { return 0.1 * std::cos(t * s); };
  spec.forcing = [](double t) { return 1.0 + std::sin(t); };

  const LinearSFNND net = make_linear_sfnn(grid, spec, &path, 1.0, 6);
  const Eigen::VectorXd out = run_linear(net);

  Eigen::VectorXd y = net.layer.b;
  for (int m = 0; m < 6; ++m) y = (net.layer.W * y + net.layer.b).eval();
  REQUIRE(out.size() == y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(out[i] == y[i]);

  CHECK_THROWS_AS((void)make_linear_sfnn(grid, spec, &path, 1.0, 0), config_error);
  CHECK_THROWS_AS((void)run_linear(net, Eigen::VectorXd::Ones(3).eval()), dimension_error);
}

TEST_CASE("deep unrolled network lands on the fixed point") {
  const GridD grid = make_grid(0.0, 1.0, 17);
  KernelSpecD spec;
  spec.deterministic_kernel = [](double t, double s) { return 0.3 * std::exp(-t - s); };
  spec.forcing = [](double t) { return std::cos(t); };
  const LinearSFNND net = make_linear_sfnn(grid, spec, nullptr, 1.0, 60);

  const Eigen::Index n = grid.n_nodes;
  const Eigen::VectorXd exact =
      Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(n, n) - net.layer.W)
          .solve(net.layer.b);
  const Eigen::VectorXd out = run_linear(net);
  CHECK((out - exact).norm() <= 1e-12 * exact.norm());

  // At the fixed point one more readout at a grid node reproduces the value.
  for (Eigen::Index i : {0L, 8L, 16L}) {
    const double v = evaluate_offgrid(net, grid.node(i), out);
    CHECK(v == doctest::Approx(out[i]).epsilon(1e-10));
  }
  // Off the grid the readout is the operator applied at t; for a pure forcing
  // network (no kernel) that is just g(t).
  KernelSpecD forcing_only;
  forcing_only.forcing = [](double t) { return 2.0 - t; };
  const LinearSFNND trivial = make_linear_sfnn(grid, forcing_only, nullptr, 1.0, 2);
  const Eigen::VectorXd triv_out = run_linear(trivial);
  CHECK(evaluate_offgrid(trivial, 0.3141, triv_out) == doctest::Approx(2.0 - 0.3141).epsilon(1e-15));

  CHECK_THROWS_AS((void)evaluate_offgrid(net, 0.5, Eigen::VectorXd::Ones(3).eval()),
                  dimension_error);
}

TEST_CASE("unrolled forward pass reports divergence with a trace") {
  const GridD grid = make_grid(0.0, 1.0, 9);
  KernelSpecD spec;
  spec.deterministic_kernel = [](double, double) { return 40.0; };  // far beyond contraction
  spec.forcing = [](double) { return 1.0; };
  const LinearSFNND net = make_linear_sfnn(grid, spec, nullptr, 1.0, 100);
  try {
    (void)run_linear(net);
    FAIL("expected divergence_error");
  } catch (const divergence_error& e) {
    CHECK_FALSE(e.trace().residuals.empty());
  }
}

TEST_CASE("nonlinear network with identity activation solves the linear system") {
  const GridD grid = make_grid(0.0, 2.0, 13);
  KernelSpecD spec;
  spec.deterministic_kernel = [](double t, double s) { return 0.25 * std::sin(t + 0.5 * s); };
  spec.forcing = [](double t) { return 1.0 + 0.5 * t; };

  const NonlinearDSFNND net = make_dsfnn(grid, spec, nullptr, Activation::Identity);
  FixedPointConfigD cfg;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 500;
  const auto [x, trace] = run_dsfnn(net, cfg);
  CHECK(trace.converged);

  const Eigen::Index n = grid.n_nodes;
  const Eigen::VectorXd exact =
      Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(n, n) - net.K).solve(net.f);
  CHECK((x - exact).norm() <= 1e-11 * exact.norm());
  CHECK(residual_norm(net, x) < 1e-12);
  // A perturbed point is not a fixed point.
  CHECK(residual_norm(net, (x.array() + 0.1).matrix().eval()) > 1e-3);
}

TEST_CASE("nonlinear network applies the stochastic part through the increment pairing") {
  const GridD grid = make_grid(0.0, 1.0, 3);
  const BrownianPathD path = sample_brownian(grid, RandomSeed{5, 0});
  KernelSpecD spec;
  spec.stochastic_kernel = [](double t, double s) { return 1.0 + t + 2.0 * s; };

  const NonlinearDSFNND net = make_dsfnn(grid, spec, &path, Activation::Identity);
  REQUIRE(net.dw.size() == 3);
  CHECK(net.dw[0] == path.increments[0]);
  CHECK(net.dw[1] == path.increments[1]);
  CHECK(net.dw[2] == 0.0);

  Eigen::VectorXd x(3);
  x << 2.0, -1.0, 3.0;
  const Eigen::VectorXd out = apply_dsfnn(net, x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double t = grid.node(i);
    double expected = 0.0;
    for (Eigen::Index j = 0; j < 2; ++j)
      expected += (1.0 + t + 2.0 * grid.node(j)) * x[j] * path.increments[j];
    CHECK(out[i] == doctest::Approx(expected).epsilon(1e-14));
  }

  CHECK_THROWS_AS((void)make_dsfnn(grid, spec, nullptr, Activation::Identity), config_error);
  CHECK_THROWS_AS((void)apply_dsfnn(net, Eigen::VectorXd::Ones(5).eval()), dimension_error);
}

TEST_CASE("contraction certificate dominates the empirical factor for deterministic nets") {
  const GridD grid = make_grid(0.0, 1.0, 11);
  KernelSpecD spec;
  spec.deterministic_kernel = [](double t, double s) { return 0.5 * std::cos(3.0 * t - s); };
  spec.forcing = [](double t) { return t; };

  for (Activation phi : {Activation::Identity, Activation::Tanh, Activation::Softplus}) {
    const NonlinearDSFNND net = make_dsfnn(grid, spec, nullptr, phi);
    const auto op = [&](const Eigen::VectorXd& y) { return apply_dsfnn(net, y); };
    const double estimate = estimate_contraction<double>(op, grid.n_nodes, 25, RandomSeed{2, 0},
                                                         NormKind::DiscreteL2, net.dt);
    CHECK(estimate <= net.certificate + 1e-12);
  }
}

TEST_CASE("volterra-fredholm assembly masks each block correctly") {
  const GridD grid = make_grid(0.0, 1.0, 5);
  const BrownianPathD path = sample_brownian(grid, RandomSeed{8, 0});
  const auto v = [](double t, double s) { return 1.0 + t - s; };
  const auto k = [](double t, double s) { return 2.0 + t * s; };
  const auto g = [](double t, double s) { return 0.5 + t + s; };
  const auto f = [](double t) { return 3.0 * t; };

  const VolterraFredholmOperatorD op =
      make_volterra_fredholm<double>(grid, v, k, g, f, &path, Activation::Identity);
  const double dt = grid.step();
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double t = grid.node(i);
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double s = grid.node(j);
      CHECK(op.V(i, j) == (j <= i ? v(t, s) * dt : 0.0));   // memory: diagonal inclusive
      CHECK(op.K(i, j) == k(t, s) * dt);                    // global: full square
      CHECK(op.G(i, j) == (j < i ? g(t, s) : 0.0));         // noise: strictly causal
    }
    CHECK(op.f[i] == f(grid.node(i)));
  }
  CHECK(op.dw[4] == 0.0);
  CHECK(op.certificate > 0.0);

  CHECK_THROWS_AS((void)make_volterra_fredholm<double>(grid, v, k, g, f, nullptr,
                                                       Activation::Identity),
                  config_error);
}

TEST_CASE("pure memory-kernel equations terminate in finitely many sweeps") {
  // v(t,t) = 0 makes the discretized operator strictly lower triangular, i.e.
  // nilpotent: the sweep recursion must stabilize after at most n sweeps even
  // though a norm-based linear rate would need dozens.
  const GridD grid = make_grid(0.0, 1.0, 9);
  const auto v = [](double t, double s) { return 2.0 * (t - s); };
  const auto f = [](double t) { return 1.0 + t; };
  const VolterraFredholmOperatorD op = make_volterra_fredholm<double>(
      grid, v, nullptr, nullptr, f, nullptr, Activation::Identity);

  FixedPointConfigD cfg;
  cfg.tolerance = 1e-15;
  cfg.max_iterations = 50;
  const auto [x, trace] = run_volterra_fredholm(op, cfg);
  CHECK(trace.converged);
  CHECK(trace.iterations_used <= 10);

  // Cross-check against the direct triangular solve of (I - V) x = f.
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(9, 9) - op.V;
  const Eigen::VectorXd exact = a.triangularView<Eigen::Lower>().solve(op.f);
  CHECK((x - exact).norm() <= 1e-12 * exact.norm());
  CHECK(residual_norm(op, x) < 1e-13);
}

TEST_CASE("mixed memory and global kernels still converge to the direct solve") {
  const GridD grid = make_grid(0.0, 1.0, 17);
  const BrownianPathD path = sample_brownian(grid, RandomSeed{77, 0});
  const auto v = [](double t, double s) { return 0.3 * std::exp(-(t - s)); };
  const auto k = [](double t, double s) { return 0.2 * std::cos(t + s); };
  const auto g = [](double t, double s) { return 0.1 * std::cos(t * s); };
  const auto f = [](double t) { return 1.0 + std::sin(t); };
  const VolterraFredholmOperatorD op =
      make_volterra_fredholm<double>(grid, v, k, g, f, &path, Activation::Identity);

  FixedPointConfigD cfg;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 500;
  const auto [x, trace] = run_volterra_fredholm(op, cfg);
  CHECK(trace.converged);

  // Direct solve of (I - V - K - G diag(dw)) x = f.
  const Eigen::Index n = grid.n_nodes;
  const Eigen::MatrixXd noise_part = op.G * Eigen::MatrixXd(op.dw.asDiagonal());
  const Eigen::MatrixXd full = Eigen::MatrixXd::Identity(n, n) - op.V - op.K - noise_part;
  const Eigen::VectorXd exact = Eigen::PartialPivLU<Eigen::MatrixXd>(full).solve(op.f);
  CHECK((x - exact).norm() <= 1e-10 * exact.norm());
}
