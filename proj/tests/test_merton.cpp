#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sfie/merton.hpp"

using namespace sfie;

namespace {

MertonConfig tiny_config(Eigen::Index n_nodes = 17) {
  MertonConfig cfg;
  cfg.grid = make_grid(0.0, 1.0, n_nodes);
  return cfg;
}

}  // namespace

TEST_CASE("configuration validation") {
  MertonConfig cfg = tiny_config();
  CHECK_NOTHROW(validate(cfg));
  cfg.spot = 0.0;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.sigma = -0.1;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.intensity = -1.0;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.jump_law.sd_log = -0.1;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.grid = make_grid(0.0, 2.0, 17);  // grid does not span [0, horizon]
  CHECK_THROWS_AS(validate(cfg), config_error);
}

TEST_CASE("deterministic limit reproduces exponential growth") {
  MertonConfig cfg = tiny_config(33);
  cfg.sigma = 0.0;
  cfg.intensity = 0.0;
  const Eigen::VectorXd path = simulate_merton_path(cfg, RandomSeed{1, 0});
  for (Eigen::Index i = 0; i < 33; ++i) {
    const double exact = cfg.spot * std::exp(cfg.drift * cfg.grid.node(i));
    CHECK(std::abs(path[i] - exact) <= 1e-14 * exact);
  }
}

TEST_CASE("a single jump multiplies the trajectory from its arrival node on") {
  MertonConfig cfg = tiny_config(5);
  cfg.sigma = 0.0;
  JumpPathD jumps;
  jumps.jump_times = {0.5};
  jumps.multipliers = {2.0};
  jumps.horizon = 1.0;
  jumps.intensity = 1.0;
  jumps.compensator_drift = 0.0;

  const Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
  const Eigen::VectorXd path = exact_path_on_grid(cfg, cfg.grid, w, jumps);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double t = cfg.grid.node(i);
    const double expected = cfg.spot * std::exp(cfg.drift * t) * (t >= 0.5 ? 2.0 : 1.0);
    CHECK(path[i] == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK_THROWS_AS((void)exact_path_on_grid(cfg, cfg.grid, Eigen::VectorXd::Zero(4), jumps),
                  dimension_error);
}

TEST_CASE("ensemble terminal mean matches the compensated growth rate") {
  MertonConfig cfg = tiny_config(33);
  const Eigen::Index n_paths = 4000;
  const MertonPathSet set = make_path_set(cfg, RandomSeed{2024, 0}, n_paths);
  REQUIRE(set.paths() == n_paths);
  REQUIRE(set.nodes() == 33);

  const Eigen::VectorXd terminal = set.exact.row(32).transpose();
  const double mean = terminal.mean();
  const double sd = std::sqrt((terminal.array() - mean).square().sum() /
                              static_cast<double>(n_paths - 1));
  const double expected = cfg.spot * std::exp(cfg.compensated_drift() * cfg.horizon);
  CHECK(std::abs(mean - expected) <= 3.5 * sd / std::sqrt(static_cast<double>(n_paths)));

  // Increment matrices mirror the stored paths.
  CHECK(set.dw.col(7) == set.brownian[7].increments);
  const auto inc = jump_increments(set.jumps[7], cfg.grid);
  CHECK(set.jump_raw.col(7) == inc.raw);
  CHECK(set.jump_compensated.col(7) == inc.compensated);
}

TEST_CASE("compensated and raw-drift operator routes agree bit for bit") {
  MertonConfig cfg = tiny_config(33);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{7, 0}, 8);
  const Eigen::MatrixXd a = sfvnn_apply_compensated(cfg, set, set.exact);
  const Eigen::MatrixXd b = sfvnn_apply_uncompensated(cfg, set, set.exact);
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index p = 0; p < a.cols(); ++p) CHECK(a(i, p) == b(i, p));
}

TEST_CASE("operator application validates shapes") {
  MertonConfig cfg = tiny_config(9);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{3, 0}, 4);
  const Eigen::MatrixXd wrong_kernel = Eigen::MatrixXd::Zero(8, 8);
  CHECK_THROWS_AS(
      (void)sfvnn_apply(1.0, cfg.grid.step(), 0.2, wrong_kernel, set.dw, set.jump_compensated,
                        set.exact),
      dimension_error);
  CHECK_THROWS_AS(
      (void)sfvnn_apply(1.0, cfg.grid.step(), 0.2, true_kernel_matrix(cfg),
                        set.dw.topRows(4), set.jump_compensated, set.exact),
      dimension_error);

  CHECK_THROWS_AS((void)ensemble_gap(set.exact, set.dw, 0.1), dimension_error);
  CHECK_THROWS_AS((void)ensemble_gap(Eigen::MatrixXd(), Eigen::MatrixXd(), 0.1), config_error);
}

TEST_CASE("the causal rate matrix fills the lower triangle inclusively") {
  const Eigen::MatrixXd k = detail::causal_rate_matrix(0.25, 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(k(i, j) == (j <= i ? 0.25 : 0.0));
  const MertonConfig cfg = tiny_config(5);
  const Eigen::MatrixXd tk = true_kernel_matrix(cfg);
  CHECK(tk(3, 2) == cfg.compensated_drift());
  CHECK(tk(2, 3) == 0.0);
}

TEST_CASE("true-kernel fixed point solves the discretized equation") {
  MertonConfig cfg = tiny_config(33);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{11, 0}, 16);
  const Eigen::MatrixXd s = true_kernel_fixed_point(cfg, set);
  const Eigen::MatrixXd swept = sfvnn_apply_compensated(cfg, set, s);
  CHECK(ensemble_gap(swept, s, cfg.grid.step()) < 1e-12);

  // Node 0 carries the inclusive quadrature's self-term and no noise, so its
  // fixed-point value is spot / (1 - mu~ dt), the same on every path.
  const double node0 = cfg.spot / (1.0 - cfg.compensated_drift() * cfg.grid.step());
  for (Eigen::Index p = 0; p < 16; ++p) {
    CHECK(s(0, p) == s(0, 0));
    CHECK(s(0, p) == doctest::Approx(node0).epsilon(1e-10));
  }

  // The discretized solve tracks the exact simulation to the scheme's
  // accuracy, and the true kernel leaves only the discretization residual.
  CHECK(ensemble_gap(s, set.exact, cfg.grid.step()) < 0.05);
  const double loss =
      residual_loss(cfg, set, true_kernel_matrix(cfg), set.exact, detail::all_columns(16));
  CHECK(loss > 0.0);
  CHECK(loss < 1e-3);
}

TEST_CASE("residual loss basics") {
  MertonConfig cfg = tiny_config(9);
  cfg.sigma = 0.0;
  cfg.intensity = 0.0;
  const MertonPathSet set = make_path_set(cfg, RandomSeed{5, 0}, 4);

  // Zero kernel, no noise, flat state: T(S) = spot exactly, so the loss is 0.
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(9, 4, cfg.spot);
  const Eigen::MatrixXd zero_kernel = Eigen::MatrixXd::Zero(9, 9);
  CHECK(residual_loss(cfg, set, zero_kernel, flat, detail::all_columns(4)) == 0.0);

  CHECK_THROWS_AS((void)residual_loss(cfg, set, zero_kernel, flat, {}), config_error);
  CHECK_THROWS_AS((void)residual_loss(cfg, set, zero_kernel, flat, {0, 9}), dimension_error);

  // Around a fixed point the residual is linear in a perturbation, so the
  // loss is quadratic: doubling the perturbation quadruples it.
  MertonConfig full = tiny_config(9);
  const MertonPathSet noisy = make_path_set(full, RandomSeed{6, 0}, 4);
  const Eigen::MatrixXd star = true_kernel_fixed_point(full, noisy);
  Eigen::MatrixXd direction(9, 4);
  const CounterRng rng(RandomSeed{8, 0});
  for (Eigen::Index i = 0; i < direction.size(); ++i)
    direction(i % 9, i / 9) = rng.normal(static_cast<std::uint64_t>(i));
  const Eigen::MatrixXd kernel = true_kernel_matrix(full);
  const double l1 = residual_loss(full, noisy, kernel, star + 0.1 * direction,
                                  detail::all_columns(4));
  const double l2 = residual_loss(full, noisy, kernel, star + 0.2 * direction,
                                  detail::all_columns(4));
  CHECK(l2 / l1 == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("training step bookkeeping: zero rate leaves parameters frozen") {
  MertonConfig cfg = tiny_config(9);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{13, 0}, 4);
  NeuralKernel net = seeded_kernel(RandomSeed{13, 1});
  net.set_normalization(0.0, 1.0, 0.0, 1.0);
  const Eigen::VectorXd before = net.to_flat();

  TrainState state;
  state.learning_rate = 0.0;
  const double loss = train_step(net, state, cfg, set, set.exact, {0, 1});
  CHECK(loss > 0.0);
  CHECK((net.to_flat() - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.step == 1);
  REQUIRE(state.loss_history.size() == 1);
  CHECK(state.loss_history[0] == loss);
  CHECK(state.moving_average[0] == loss);

  CHECK_THROWS_AS((void)train_step(net, state, cfg, set, set.exact, {}), config_error);
  CHECK_THROWS_AS((void)train_step(net, state, cfg, set, set.exact, {4}), dimension_error);
  CHECK_THROWS_AS(
      (void)train_step(net, state, cfg, set, set.exact.topRows(5).eval(), {0}),
      dimension_error);
}

TEST_CASE("non-finite anchors raise a training error with the state snapshot") {
  MertonConfig cfg = tiny_config(9);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{14, 0}, 4);
  NeuralKernel net = seeded_kernel(RandomSeed{14, 1});
  TrainState state;
  state.append_loss(0.7);

  Eigen::MatrixXd poisoned = set.exact;
  poisoned(3, 1) = std::numeric_limits<double>::infinity();
  try {
    (void)train_step(net, state, cfg, set, poisoned, {0, 1});
    FAIL("expected training_error");
  } catch (const training_error& e) {
    REQUIRE(e.state().loss_history.size() == 1);
    CHECK(e.state().loss_history[0] == 0.7);
  }
  // The failed step must not have polluted the live state.
  CHECK(state.loss_history.size() == 1);
  CHECK(state.step == 0);
}

TEST_CASE("training gradient matches finite differences through the whole chain") {
  MertonConfig cfg = tiny_config(9);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{17, 0}, 4);
  NeuralKernel net = seeded_kernel(RandomSeed{17, 1});
  net.set_normalization(0.0, 1.0, 0.0, 1.0);
  const std::vector<Eigen::Index> batch{0, 2};
  const Eigen::VectorXd nodes = cfg.grid.nodes();
  const double dt = cfg.grid.step();

  // Analytic gradient, assembled exactly as the training step does it.
  const Eigen::MatrixXd kernel = kernel_matrix(net, nodes, nodes);
  const Eigen::MatrixXd residual = detail::batch_residual(cfg, set, kernel, set.exact, batch);
  const Eigen::MatrixXd anchor_b = detail::gather_columns(set.exact, batch);
  const Eigen::MatrixXd d_kernel =
      (-2.0 * dt * dt / 2.0) * (residual * anchor_b.transpose());
  const Eigen::VectorXd grad = parameter_gradient(net, nodes, nodes, d_kernel);

  const auto loss_at = [&](const Eigen::VectorXd& theta) {
    NeuralKernel probe = net;
    probe.from_flat(theta);
    return residual_loss(cfg, set, kernel_matrix(probe, nodes, nodes), set.exact, batch);
  };
  const Eigen::VectorXd theta0 = net.to_flat();
  const double h = 1e-5;
  for (Eigen::Index k : {0L, 40L, 64L, 90L, 96L, 500L, 1119L, 1120L, 1152L, 1184L}) {
    Eigen::VectorXd up = theta0, down = theta0;
    up[k] += h;
    down[k] -= h;
    const double fd = (loss_at(up) - loss_at(down)) / (2.0 * h);
    CHECK(std::abs(fd - grad[k]) / std::max(std::abs(grad[k]), 1e-8) < 1e-4);
  }
}

TEST_CASE("a short training run reduces the residual loss") {
  MertonConfig cfg = tiny_config(9);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{19, 0}, 8);
  NeuralKernel net = seeded_kernel(RandomSeed{19, 1}, 2.0);
  net.set_normalization(0.0, 1.0, 0.0, 1.0);
  TrainState state;
  state.learning_rate = 1e-2;

  const CounterRng rng = CounterRng(RandomSeed{19, 2}).fork(substream::batch);
  for (int step = 0; step < 60; ++step) {
    std::vector<Eigen::Index> batch(4);
    for (int b = 0; b < 4; ++b)
      batch[static_cast<std::size_t>(b)] = static_cast<Eigen::Index>(
          rng.uniform_index(static_cast<std::uint64_t>(step * 4 + b), 8));
    (void)train_step(net, state, cfg, set, set.exact, batch);
  }
  REQUIRE(state.loss_history.size() == 60);
  CHECK(state.current_average() < state.loss_history.front());
}

TEST_CASE("outer iteration under the true kernel converges superlinearly fast") {
  MertonConfig cfg = tiny_config(17);
  const MertonPathSet set = make_path_set(cfg, RandomSeed{23, 0}, 8);
  const Eigen::MatrixXd kernel = true_kernel_matrix(cfg);

  SfvnnState state;
  state.S = Eigen::MatrixXd::Constant(set.nodes(), set.paths(), cfg.spot);
  while (state.outer_k < 25) {
    state = sfvnn_outer_iterate(std::move(state), kernel, cfg, set);
    if (state.fp_residuals.back() < 1e-12) break;
  }
  CHECK(state.fp_residuals.back() < 1e-12);
  CHECK(state.outer_k <= 25);
  // Residuals fall strictly once the iteration is underway.
  for (std::size_t k = 2; k < state.fp_residuals.size(); ++k)
    CHECK(state.fp_residuals[k] < state.fp_residuals[k - 1]);
}

TEST_CASE("euler recursion is first-order accurate in the deterministic limit") {
  MertonConfig cfg;
  cfg.sigma = 0.0;
  cfg.intensity = 0.0;
  const double exact = std::exp(cfg.drift);

  double errors[2];
  int at = 0;
  for (Eigen::Index n : {101, 201}) {
    cfg.grid = make_grid(0.0, 1.0, n);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n - 1);
    const Eigen::VectorXd path = euler_path(cfg, cfg.grid, zero, zero);
    errors[at++] = std::abs(path[n - 1] - exact);
  }
  CHECK(errors[0] / errors[1] == doctest::Approx(2.0).epsilon(0.15));

  CHECK_THROWS_AS(
      (void)euler_path(cfg, cfg.grid, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(200)),
      dimension_error);
}

TEST_CASE("end-to-end learned-kernel smoke run on a tiny problem") {
  MertonConfig cfg = tiny_config(17);
  SfvnnRunConfig run;
  run.seed = RandomSeed{42, 0};
  run.n_paths = 8;
  run.train_sweeps = 2;
  run.steps_per_sweep = 40;
  run.batch_size = 4;

  const SfvnnResult result = run_sfvnn(cfg, run);
  REQUIRE(result.train.loss_history.size() == 80);
  for (double loss : result.train.loss_history) CHECK(std::isfinite(loss));
  CHECK(result.chosen_sweep < 2);
  CHECK(result.train.sweep_history.front() == 0);
  CHECK(result.train.sweep_history.back() == 1);
  CHECK(result.state.S.allFinite());
  CHECK(result.state.outer_k >= 1);
  CHECK(result.state.fp_residuals.size() == static_cast<std::size_t>(result.state.outer_k));
  CHECK(result.state.nn_errors.size() == static_cast<std::size_t>(result.state.outer_k));
  CHECK(result.reference.rows() == 17);
  CHECK(result.reference.cols() == 8);

  SfvnnRunConfig bad = run;
  bad.batch_size = 0;
  CHECK_THROWS_AS((void)run_sfvnn(cfg, bad), config_error);
}
