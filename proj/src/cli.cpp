#include "sfie/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfie/assemble.hpp"
#include "sfie/black_scholes.hpp"
#include "sfie/contagion.hpp"
#include "sfie/errors.hpp"
#include "sfie/fixed_point.hpp"
#include "sfie/grid.hpp"
#include "sfie/io.hpp"
#include "sfie/kernels.hpp"
#include "sfie/merton.hpp"
#include "sfie/networks.hpp"
#include "sfie/paths.hpp"
#include "sfie/rng.hpp"
#include "sfie/spectral.hpp"

namespace sfie::cli {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  long long paths = 0;
  double tol = 0.0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* paths_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  bool demo = false;
  long long degree = 0;
  CLI::Option* degree_opt = nullptr;
  std::string mode;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "INI-style configuration file");
  cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
  args.seed_opt = cmd->add_option("--seed", args.seed, "override solver.seed");
  args.paths_opt = cmd->add_option("--paths", args.paths, "override solver.paths");
  args.tol_opt = cmd->add_option("--tol", args.tol, "override solver.tolerance");
}

/// Defaults < config file < environment < explicit command-line flags.
ConfigMap effective_config(
    const std::vector<std::pair<std::string, std::string>>& defaults, const CommonArgs& args) {
  ConfigMap config;
  for (const auto& [key, value] : defaults) config.set(key, value);
  if (!args.config_path.empty() && !args.demo) {
    const ConfigMap file = load_config(args.config_path);
    for (const auto& [key, value] : file.entries()) config.set(key, value);
  }
  apply_env_overrides(config);
  if (args.seed_opt != nullptr && args.seed_opt->count() > 0)
    config.set("solver.seed", std::to_string(args.seed));
  if (args.paths_opt != nullptr && args.paths_opt->count() > 0)
    config.set("solver.paths", std::to_string(args.paths));
  if (args.tol_opt != nullptr && args.tol_opt->count() > 0)
    config.set("solver.tolerance", format_double(args.tol));
  return config;
}

DataTable make_table(std::vector<std::string> headers, const std::vector<Eigen::VectorXd>& cols) {
  DataTable table;
  table.headers = std::move(headers);
  if (cols.empty()) throw dimension_error("make_table: no columns");
  const Eigen::Index rows = cols.front().size();
  table.columns.resize(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].size() != rows) throw dimension_error("make_table: ragged columns");
    table.columns.col(static_cast<Eigen::Index>(c)) = cols[c];
  }
  return table;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

/// iteration / residual / contraction-ratio table; the ratio column is padded
/// with NaN where no estimate exists yet.
DataTable trace_table(const IterationTraceD& trace) {
  const Eigen::Index n = static_cast<Eigen::Index>(trace.residuals.size());
  Eigen::VectorXd iteration(n), residual(n), ratio(n);
  const Eigen::Index pad = n - static_cast<Eigen::Index>(trace.ratio_estimates.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    iteration[i] = static_cast<double>(i + 1);
    residual[i] = trace.residuals[static_cast<std::size_t>(i)];
    ratio[i] = i < pad ? kNaN : trace.ratio_estimates[static_cast<std::size_t>(i - pad)];
  }
  return make_table({"iteration", "residual", "contraction_ratio"}, {iteration, residual, ratio});
}

/// Collects artifacts for one run, prints where they went, and writes the
/// manifest (digest, seed, outputs, duration, renderer warnings) at the end.
class ArtifactSink {
 public:
  ArtifactSink(std::string dir, std::string subcommand, const ConfigMap& config,
               std::uint64_t seed, std::uint64_t stream)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
    manifest_.subcommand = std::move(subcommand);
    manifest_.config_digest = fnv1a64(canonical_config(config));
    manifest_.seed = seed;
    manifest_.stream = stream;
  }

  void csv(const std::string& name, const DataTable& table) {
    write_csv(dir_ + "/" + name, table);
    manifest_.outputs.push_back(name);
    std::cout << "wrote " << dir_ << "/" << name << "\n";
  }

  void plot(const std::string& name, const DataTable& table, const PlotOptions& options) {
    const PlotResult result = write_plot(dir_ + "/" + name, table, options);
    manifest_.warnings += result.dropped_points;
    if (result.dropped_points > 0)
      std::cout << "warning: dropped " << result.dropped_points << " unplottable points in "
                << name << "\n";
    manifest_.outputs.push_back(name);
    std::cout << "wrote " << dir_ << "/" << name << "\n";
  }

  void finish() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest_.duration_seconds = std::chrono::duration<double>(elapsed).count();
    write_manifest(dir_ + "/manifest.json", manifest_);
    std::cout << "wrote " << dir_ << "/manifest.json\n";
  }

 private:
  std::string dir_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

GridD grid_from(const ConfigMap& config) {
  return make_grid(config.get_double("grid.lower", 0.0), config.get_double("grid.upper", 1.0),
                   static_cast<Eigen::Index>(config.get_int("grid.nodes", 101)));
}

FixedPointConfigD solver_from(const ConfigMap& config, double dt) {
  FixedPointConfigD fp;
  fp.kappa = KappaScheduleD::constant(config.get_double("solver.relaxation", 1.0));
  fp.tolerance = config.get_double("solver.tolerance", 1e-12);
  fp.max_iterations = static_cast<Eigen::Index>(config.get_int("solver.max_iterations", 200));
  fp.dt = dt;
  return fp;
}

Activation activation_from(const ConfigMap& config, const std::string& key) {
  const std::string name = config.get_string(key, "tanh");
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  throw config_error("config key '" + key + "' must be identity, tanh or softplus, got: " + name);
}

// ---------------------------------------------------------------------------
// linear: affine fixed-point sweep on a smooth demo problem.
// ---------------------------------------------------------------------------

int cmd_linear(CommonArgs args) {
  if (args.demo) args.config_path.clear();
  const ConfigMap config = effective_config(
      {{"grid.lower", "0"},
       {"grid.upper", "1"},
       {"grid.nodes", "101"},
       {"problem.kernel_scale", "0.3"},
       {"problem.stochastic_scale", "0"},
       {"problem.forcing_amplitude", "1"},
       {"problem.causal", "0"},
       {"solver.relaxation", "1"},
       {"solver.tolerance", "1e-12"},
       {"solver.max_iterations", "200"},
       {"solver.seed", "1"}},
      args);

  const GridD grid = grid_from(config);
  const double kernel_scale = config.get_double("problem.kernel_scale", 0.3);
  const double stochastic_scale = config.get_double("problem.stochastic_scale", 0.0);
  const double amplitude = config.get_double("problem.forcing_amplitude", 1.0);
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));

  KernelSpecD spec;
  if (kernel_scale != 0.0)
    spec.deterministic_kernel = [kernel_scale](double t, double s) {
      return kernel_scale * std::cos(t + s);
    };
  if (stochastic_scale != 0.0)
    spec.stochastic_kernel = [stochastic_scale](double t, double s) {
      return stochastic_scale * std::cos(t * s);
    };
  spec.forcing = [amplitude](double t) { return amplitude * (1.0 + std::sin(t)); };
  spec.causal_mask = config.get_int("problem.causal", 0) != 0 ? CausalMask::Causal
                                                              : CausalMask::Full;

  std::optional<BrownianPathD> path;
  if (stochastic_scale != 0.0) path = sample_brownian(grid, RandomSeed{seed, 0});
  const LayerParamsD layer = assemble_layer(
      grid, spec, path ? &*path : nullptr, config.get_double("solver.relaxation", 1.0));

  // The layer already carries the relaxation, so the sweep itself is plain.
  FixedPointConfigD fp = solver_from(config, grid.step());
  fp.kappa = KappaScheduleD::constant(1.0);
  const auto [y, trace] = iterate(
      [&layer](const Eigen::VectorXd& v) { return (layer.W * v + layer.b).eval(); },
      Eigen::VectorXd(layer.b), fp);

  ArtifactSink sink(args.out_dir, "linear", config, seed, 0);
  sink.csv("linear_solution.csv", make_table({"t", "y"}, {grid.nodes(), y}));
  sink.csv("linear_trace.csv", trace_table(trace));
  PlotOptions solution_plot;
  solution_plot.title = "affine sweep solution";
  solution_plot.x_label = "t";
  solution_plot.y_label = "y";
  sink.plot("linear_solution.svg", make_table({"t", "y"}, {grid.nodes(), y}), solution_plot);
  PlotOptions trace_plot;
  trace_plot.title = "affine sweep residuals";
  trace_plot.x_label = "iteration";
  trace_plot.y_label = "relative residual";
  trace_plot.log_y = true;
  sink.plot("linear_trace.svg", trace_table(trace), trace_plot);
  sink.finish();

  std::cout << "iterations: " << trace.iterations_used
            << "  final residual: " << format_double(trace.residuals.back())
            << "  converged: " << (trace.converged ? "yes" : "no") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// dsfnn: nonlinear fixed-point network.
// ---------------------------------------------------------------------------

int cmd_dsfnn(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"grid.lower", "0"},
       {"grid.upper", "1"},
       {"grid.nodes", "101"},
       {"problem.kernel_scale", "0.25"},
       {"problem.stochastic_scale", "0.1"},
       {"problem.forcing_amplitude", "1"},
       {"problem.phi", "tanh"},
       {"solver.relaxation", "1"},
       {"solver.tolerance", "1e-12"},
       {"solver.max_iterations", "200"},
       {"solver.seed", "1"}},
      args);

  const GridD grid = grid_from(config);
  const double kernel_scale = config.get_double("problem.kernel_scale", 0.25);
  const double stochastic_scale = config.get_double("problem.stochastic_scale", 0.1);
  const double amplitude = config.get_double("problem.forcing_amplitude", 1.0);
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));

  KernelSpecD spec;
  if (kernel_scale != 0.0)
    spec.deterministic_kernel = [kernel_scale](double t, double s) {
      return kernel_scale * std::cos(t + s);
    };
  if (stochastic_scale != 0.0)
    spec.stochastic_kernel = [stochastic_scale](double t, double s) {
      return stochastic_scale * std::cos(t * s);
    };
  spec.forcing = [amplitude](double t) { return amplitude * (1.0 + std::sin(t)); };

  std::optional<BrownianPathD> path;
  if (stochastic_scale != 0.0) path = sample_brownian(grid, RandomSeed{seed, 0});
  const NonlinearDSFNND net =
      make_dsfnn(grid, spec, path ? &*path : nullptr, activation_from(config, "problem.phi"));
  const auto [x, trace] = run_dsfnn(net, solver_from(config, grid.step()));

  ArtifactSink sink(args.out_dir, "dsfnn", config, seed, 0);
  sink.csv("dsfnn_solution.csv", make_table({"t", "x"}, {grid.nodes(), x}));
  sink.csv("dsfnn_trace.csv", trace_table(trace));
  PlotOptions trace_plot;
  trace_plot.title = "nonlinear network residuals";
  trace_plot.x_label = "iteration";
  trace_plot.y_label = "relative residual";
  trace_plot.log_y = true;
  sink.plot("dsfnn_trace.svg", trace_table(trace), trace_plot);
  sink.finish();

  std::cout << "contraction certificate: " << format_double(net.certificate)
            << "  iterations: " << trace.iterations_used
            << "  final residual: " << format_double(trace.residuals.back())
            << "  converged: " << (trace.converged ? "yes" : "no") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// vf: mixed causal/full kernel network.
// ---------------------------------------------------------------------------

int cmd_vf(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"grid.lower", "0"},
       {"grid.upper", "1"},
       {"grid.nodes", "101"},
       {"problem.volterra_scale", "0.3"},
       {"problem.fredholm_scale", "0.2"},
       {"problem.stochastic_scale", "0.1"},
       {"problem.forcing_amplitude", "1"},
       {"problem.phi", "tanh"},
       {"solver.relaxation", "1"},
       {"solver.tolerance", "1e-12"},
       {"solver.max_iterations", "200"},
       {"solver.seed", "1"}},
      args);

  const GridD grid = grid_from(config);
  const double volterra_scale = config.get_double("problem.volterra_scale", 0.3);
  const double fredholm_scale = config.get_double("problem.fredholm_scale", 0.2);
  const double stochastic_scale = config.get_double("problem.stochastic_scale", 0.1);
  const double amplitude = config.get_double("problem.forcing_amplitude", 1.0);
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));

  KernelSpecD::Kernel volterra;
  if (volterra_scale != 0.0)
    volterra = [volterra_scale](double t, double s) {
      return volterra_scale * std::exp(-(t - s));
    };
  KernelSpecD::Kernel fredholm;
  if (fredholm_scale != 0.0)
    fredholm = [fredholm_scale](double t, double s) { return fredholm_scale * std::cos(t + s); };
  KernelSpecD::Kernel stochastic;
  if (stochastic_scale != 0.0)
    stochastic = [stochastic_scale](double t, double s) {
      return stochastic_scale * std::cos(t * s);
    };
  const KernelSpecD::Forcing forcing = [amplitude](double t) {
    return amplitude * (1.0 + std::sin(t));
  };

  std::optional<BrownianPathD> path;
  if (stochastic_scale != 0.0) path = sample_brownian(grid, RandomSeed{seed, 0});
  const VolterraFredholmOperatorD op =
      make_volterra_fredholm(grid, volterra, fredholm, stochastic, forcing,
                             path ? &*path : nullptr, activation_from(config, "problem.phi"));
  const auto [x, trace] = run_volterra_fredholm(op, solver_from(config, grid.step()));

  ArtifactSink sink(args.out_dir, "vf", config, seed, 0);
  sink.csv("vf_solution.csv", make_table({"t", "x"}, {grid.nodes(), x}));
  sink.csv("vf_trace.csv", trace_table(trace));
  PlotOptions trace_plot;
  trace_plot.title = "mixed-kernel network residuals";
  trace_plot.x_label = "iteration";
  trace_plot.y_label = "relative residual";
  trace_plot.log_y = true;
  sink.plot("vf_trace.svg", trace_table(trace), trace_plot);
  sink.finish();

  std::cout << "contraction certificate: " << format_double(op.certificate)
            << "  iterations: " << trace.iterations_used
            << "  final residual: " << format_double(trace.residuals.back())
            << "  converged: " << (trace.converged ? "yes" : "no") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bs: option pricing (integral pricer, barrier boundary-value problem,
// polynomial projection).
// ---------------------------------------------------------------------------

int cmd_bs(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"model.rate", "0.05"},
       {"model.sigma", "0.2"},
       {"model.maturity", "1"},
       {"model.strike", "100"},
       {"model.barrier", "90"},
       {"sgrid.lower", "90"},
       {"sgrid.upper", "100"},
       {"sgrid.nodes", "201"},
       {"pricer.nodes", "96"},
       {"galerkin.degree", "15"},
       {"solver.relaxation", "1"},
       {"solver.tolerance", "1e-10"},
       {"solver.max_iterations", "500"},
       {"solver.seed", "1"}},
      args);

  BsConfig bs;
  bs.rate = config.get_double("model.rate", 0.05);
  bs.sigma = config.get_double("model.sigma", 0.2);
  bs.maturity = config.get_double("model.maturity", 1.0);
  bs.strike = config.get_double("model.strike", 100.0);
  bs.barrier = config.get_double("model.barrier", 90.0);
  bs.s_grid = make_grid(config.get_double("sgrid.lower", 90.0),
                        config.get_double("sgrid.upper", 100.0),
                        static_cast<Eigen::Index>(config.get_int("sgrid.nodes", 201)));
  const Eigen::Index pricer_nodes =
      static_cast<Eigen::Index>(config.get_int("pricer.nodes", 96));
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));
  const Eigen::Index n = bs.s_grid.n_nodes;

  if (args.mode == "price") {
    Eigen::VectorXd s(n), exact(n), greens(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = bs.s_grid.node(i);
      exact[i] = black_scholes_call(s[i], bs.strike, bs.rate, bs.sigma, bs.maturity);
      greens[i] =
          price_greens_function(s[i], bs.strike, bs.rate, bs.sigma, bs.maturity, pricer_nodes);
    }
    ArtifactSink sink(args.out_dir, "bs price", config, seed, 0);
    const DataTable table = make_table({"S", "V_exact", "V_greens"}, {s, exact, greens});
    sink.csv("bs_price.csv", table);
    PlotOptions plot;
    plot.title = "call price: closed form vs integral pricer";
    plot.x_label = "S";
    plot.y_label = "price";
    sink.plot("bs_price.svg", table, plot);
    sink.finish();
    std::cout << "max abs pricing gap: " << format_double((exact - greens).cwiseAbs().maxCoeff())
              << "\n";
    return 0;
  }

  if (args.mode == "barrier") {
    const auto [sol, trace] = solve_barrier_bvp(bs, solver_from(config, bs.s_grid.step()));
    Eigen::VectorXd s(n), exact(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = bs.s_grid.node(i);
      exact[i] = barrier_closed_form(s[i], bs);
    }
    double sup_rel = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      sup_rel = std::max(sup_rel,
                         std::abs(sol.V[i] - exact[i]) / std::max(std::abs(exact[i]), 1.0));

    ArtifactSink sink(args.out_dir, "bs barrier", config, seed, 0);
    const DataTable table = make_table({"S", "V_exact", "V_sfnn"}, {s, exact, sol.V});
    sink.csv("bs_barrier.csv", table);
    sink.csv("bs_barrier_trace.csv", trace_table(trace));
    PlotOptions plot;
    plot.title = "barrier option value: closed form vs network sweep";
    plot.x_label = "S";
    plot.y_label = "V";
    sink.plot("bs_barrier.svg", table, plot);
    PlotOptions trace_plot;
    trace_plot.title = "barrier sweep residuals";
    trace_plot.x_label = "iteration";
    trace_plot.y_label = "sup change";
    trace_plot.log_y = true;
    sink.plot("bs_barrier_trace.svg", trace_table(trace), trace_plot);
    sink.finish();

    std::cout << "sweep spectral radius: " << format_double(sol.spectral_radius)
              << "  iterations: " << trace.iterations_used
              << "  sup rel error vs closed form: " << format_double(sup_rel) << "\n";
    return 0;
  }

  // galerkin
  const Eigen::Index degree =
      (args.degree_opt != nullptr && args.degree_opt->count() > 0)
          ? static_cast<Eigen::Index>(args.degree)
          : static_cast<Eigen::Index>(config.get_int("galerkin.degree", 15));
  const GalerkinResult fit = galerkin_projection(degree, bs, pricer_nodes);
  Eigen::VectorXd s(n), exact(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s[i] = bs.s_grid.node(i);
    exact[i] = black_scholes_call(s[i], bs.strike, bs.rate, bs.sigma, bs.maturity);
  }
  ArtifactSink sink(args.out_dir, "bs galerkin", config, seed, 0);
  const DataTable table = make_table({"S", "V_exact", "V_greens", "V_galerkin"},
                                     {s, exact, fit.samples, fit.fitted});
  sink.csv("bs_galerkin.csv", table);
  PlotOptions plot;
  plot.title = "polynomial projection of the price curve";
  plot.x_label = "S";
  plot.y_label = "price";
  sink.plot("bs_galerkin.svg", table, plot);
  sink.finish();
  std::cout << "degree: " << degree << "  basis rank: " << fit.rank
            << "  relative L2 error: " << format_double(fit.relative_error) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// contagion: interbank distress propagation.
// ---------------------------------------------------------------------------

int cmd_contagion(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"model.banks", "5"},
       {"model.strength", "0.4"},
       {"model.recovery", "1.0"},
       {"model.exposures_row1", "0 0.5 0.3 0.2 0.1"},
       {"model.exposures_row2", "0.4 0 0.4 0.2 0.1"},
       {"model.exposures_row3", "0.3 0.3 0 0.3 0.1"},
       {"model.exposures_row4", "0.2 0.4 0.3 0 0.1"},
       {"model.exposures_row5", "0.1 0.1 0.1 0.1 0"},
       {"model.shock_levels", "0.1 0.1 0.1 0.1 0.1"},
       {"model.shock_decays", "0.7 0.7 0.7 0.7 1.2"},
       {"grid.horizon", "10"},
       {"grid.nodes", "301"},
       {"solver.relaxation", "1"},
       {"solver.tolerance", "1e-12"},
       {"solver.max_iterations", "400"},
       {"solver.seed", "1"}},
      args);

  const Eigen::Index banks = static_cast<Eigen::Index>(config.get_int("model.banks", 5));
  if (banks < 1) throw config_error("contagion: model.banks must be >= 1");

  ContagionNetwork net;
  net.exposures.resize(banks, banks);
  for (Eigen::Index i = 0; i < banks; ++i) {
    const std::string key = "model.exposures_row" + std::to_string(i + 1);
    const std::vector<double> row = config.get_list(key, {});
    if (static_cast<Eigen::Index>(row.size()) != banks)
      throw config_error("contagion: " + key + " needs exactly " + std::to_string(banks) +
                         " entries");
    net.exposures.row(i) = to_vector(row).transpose();
  }
  net.contagion_strength = config.get_double("model.strength", 0.4);
  net.recovery_rate = config.get_double("model.recovery", 1.0);
  const std::vector<double> levels = config.get_list("model.shock_levels", {});
  const std::vector<double> decays = config.get_list("model.shock_decays", {});
  if (static_cast<Eigen::Index>(levels.size()) != banks ||
      static_cast<Eigen::Index>(decays.size()) != banks)
    throw config_error("contagion: shock lists need one entry per bank");
  net.shocks.resize(static_cast<std::size_t>(banks));
  for (Eigen::Index i = 0; i < banks; ++i)
    net.shocks[static_cast<std::size_t>(i)] = ShockSpec{levels[static_cast<std::size_t>(i)],
                                                        decays[static_cast<std::size_t>(i)]};
  net.grid = make_grid(0.0, config.get_double("grid.horizon", 10.0),
                       static_cast<Eigen::Index>(config.get_int("grid.nodes", 301)));
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));

  const ContagionSolution sol = solve_contagion(net, solver_from(config, net.grid.step()));

  std::vector<std::string> headers{"t"};
  std::vector<Eigen::VectorXd> cols{net.grid.nodes()};
  for (Eigen::Index i = 0; i < banks; ++i) {
    headers.push_back("bank_" + std::to_string(i + 1));
    cols.push_back(sol.Y.row(i).transpose());
  }
  ArtifactSink sink(args.out_dir, "contagion", config, seed, 0);
  const DataTable table = make_table(headers, cols);
  sink.csv("contagion_solution.csv", table);
  sink.csv("contagion_trace.csv", trace_table(sol.trace));
  PlotOptions plot;
  plot.title = "bank distress trajectories";
  plot.x_label = "t";
  plot.y_label = "distress";
  sink.plot("contagion_solution.svg", table, plot);
  PlotOptions trace_plot;
  trace_plot.title = "contagion sweep residuals";
  trace_plot.x_label = "iteration";
  trace_plot.y_label = "relative residual";
  trace_plot.log_y = true;
  sink.plot("contagion_trace.svg", trace_table(sol.trace), trace_plot);
  sink.finish();

  std::cout << "spectral certificate: " << format_double(sol.spectral_radius)
            << "  iterations: " << sol.trace.iterations_used
            << "  max distress at horizon: "
            << format_double(sol.Y.col(net.grid.n_nodes - 1).maxCoeff());
  if (!sol.clipped_banks.empty())
    std::cout << "  warning: " << sol.clipped_banks.size() << " bank(s) left [0, 1]";
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// merton: learned-kernel jump-diffusion solver.
// ---------------------------------------------------------------------------

int cmd_merton(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"model.drift", "0.05"},
       {"model.sigma", "0.2"},
       {"model.intensity", "1"},
       {"model.jump_mean_log", "-0.1"},
       {"model.jump_sd_log", "0.15"},
       {"model.spot", "1"},
       {"model.horizon", "1"},
       {"model.nodes", "64"},
       {"train.sweeps", "12"},
       {"train.steps", "1000"},
       {"train.batch", "16"},
       {"train.learning_rate", "0.01"},
       {"train.gain", "4"},
       {"solver.paths", "64"},
       {"solver.tolerance", "1e-12"},
       {"solver.max_outer", "20"},
       {"solver.seed", "20240803"}},
      args);

  MertonConfig mc;
  mc.drift = config.get_double("model.drift", 0.05);
  mc.sigma = config.get_double("model.sigma", 0.2);
  mc.intensity = config.get_double("model.intensity", 1.0);
  mc.jump_law = LogNormalParams{config.get_double("model.jump_mean_log", -0.1),
                                config.get_double("model.jump_sd_log", 0.15)};
  mc.spot = config.get_double("model.spot", 1.0);
  mc.horizon = config.get_double("model.horizon", 1.0);
  mc.grid = make_grid(0.0, mc.horizon,
                      static_cast<Eigen::Index>(config.get_int("model.nodes", 64)));

  SfvnnRunConfig rc;
  rc.seed = RandomSeed{static_cast<std::uint64_t>(config.get_int("solver.seed", 20240803)), 0};
  rc.n_paths = static_cast<Eigen::Index>(config.get_int("solver.paths", 64));
  rc.train_sweeps = static_cast<Eigen::Index>(config.get_int("train.sweeps", 12));
  rc.steps_per_sweep = static_cast<Eigen::Index>(config.get_int("train.steps", 1000));
  rc.batch_size = static_cast<Eigen::Index>(config.get_int("train.batch", 16));
  rc.learning_rate = config.get_double("train.learning_rate", 0.01);
  rc.init_gain = config.get_double("train.gain", 4.0);
  rc.tolerance = config.get_double("solver.tolerance", 1e-12);
  rc.max_outer = static_cast<Eigen::Index>(config.get_int("solver.max_outer", 20));

  const SfvnnResult result = run_sfvnn(mc, rc);

  const Eigen::Index outer = result.state.outer_k;
  Eigen::VectorXd outer_idx(outer), fp_res(outer), nn_err(outer);
  for (Eigen::Index k = 0; k < outer; ++k) {
    outer_idx[k] = static_cast<double>(k + 1);
    fp_res[k] = result.state.fp_residuals[static_cast<std::size_t>(k)];
    nn_err[k] = result.state.nn_errors[static_cast<std::size_t>(k)];
  }

  ArtifactSink sink(args.out_dir, "merton run", config, rc.seed.seed, rc.seed.stream_id);
  sink.csv("merton_loss.csv", loss_table(result.train));
  const DataTable outer_table =
      make_table({"outer_iteration", "fp_residual", "nn_error"}, {outer_idx, fp_res, nn_err});
  sink.csv("merton_outer.csv", outer_table);
  const MertonPathSet ensemble = make_path_set(mc, rc.seed, rc.n_paths);
  const DataTable solution_table = make_table(
      {"t", "exact_mean", "solved_mean", "reference_mean"},
      {mc.grid.nodes(), Eigen::VectorXd(ensemble.exact.rowwise().mean()),
       Eigen::VectorXd(result.state.S.rowwise().mean()),
       Eigen::VectorXd(result.reference.rowwise().mean())});
  sink.csv("merton_solution.csv", solution_table);

  DataTable loss = loss_table(result.train);
  DataTable loss_plot_table =
      make_table({"global_step", "loss", "moving_average"},
                 {loss.columns.col(0), loss.columns.col(2), loss.columns.col(3)});
  PlotOptions loss_plot;
  loss_plot.title = "kernel training loss (restart spikes included)";
  loss_plot.x_label = "step";
  loss_plot.y_label = "loss";
  loss_plot.log_y = true;
  sink.plot("merton_loss.svg", loss_plot_table, loss_plot);
  PlotOptions outer_plot;
  outer_plot.title = "outer iteration: update size and oracle gap";
  outer_plot.x_label = "outer iteration";
  outer_plot.y_label = "relative error";
  outer_plot.log_y = true;
  sink.plot("merton_outer.svg", outer_table, outer_plot);
  sink.finish();

  const double first_ma = result.train.moving_average.empty()
                              ? 0.0
                              : result.train.moving_average.front();
  std::cout << "chosen restart: " << result.chosen_sweep
            << "  end training average: " << format_double(result.train.current_average())
            << "  (first-window average " << format_double(first_ma) << ")\n";
  std::cout << "outer iterations: " << outer
            << "  final residual: " << format_double(fp_res[outer - 1])
            << "  gap to true-kernel solution: " << format_double(nn_err[outer - 1])
            << "  converged: " << (result.converged ? "yes" : "no") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bounds: a-priori depth bound vs measured error on a random contraction.
// ---------------------------------------------------------------------------

int cmd_bounds(const CommonArgs& args) {
  const ConfigMap config = effective_config(
      {{"problem.size", "64"},
       {"problem.contraction", "0.5"},
       {"depth.max", "30"},
       {"bound.epsilon", "1e-6"},
       {"bound.c_dt", "0"},
       {"solver.seed", "1"}},
      args);

  const Eigen::Index n = static_cast<Eigen::Index>(config.get_int("problem.size", 64));
  const double q = config.get_double("problem.contraction", 0.5);
  const Eigen::Index max_depth = static_cast<Eigen::Index>(config.get_int("depth.max", 30));
  const double epsilon = config.get_double("bound.epsilon", 1e-6);
  const double c_dt = config.get_double("bound.c_dt", 0.0);
  const std::uint64_t seed = static_cast<std::uint64_t>(config.get_int("solver.seed", 1));
  if (n < 1) throw config_error("bounds: problem.size must be >= 1");
  if (!(q > 0.0 && q < 1.0)) throw config_error("bounds: problem.contraction must lie in (0, 1)");
  if (max_depth < 1) throw config_error("bounds: depth.max must be >= 1");

  // Random affine map scaled so its Lipschitz constant (2-norm) is exactly q.
  const CounterRng rng = CounterRng(RandomSeed{seed, 0}).fork(substream::probe);
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      w(i, j) = 2.0 * rng.uniform(static_cast<std::uint64_t>(j * n + i)) - 1.0;
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i)
    b[i] = rng.normal(static_cast<std::uint64_t>(n * n + i));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(w.transpose() * w);
  const double two_norm = std::sqrt(gram.eigenvalues().maxCoeff());
  if (two_norm > 0.0) w *= q / two_norm;

  const Eigen::VectorXd y_star =
      (Eigen::MatrixXd::Identity(n, n) - w).partialPivLu().solve(b);
  const double gap = (w * b).norm();  // ||S y0 - y0|| from the start y0 = b

  Eigen::VectorXd depth(max_depth), bound(max_depth), actual(max_depth);
  Eigen::VectorXd y = b;
  for (Eigen::Index m = 1; m <= max_depth; ++m) {
    y = (w * y + b).eval();
    depth[m - 1] = static_cast<double>(m);
    bound[m - 1] = error_bound_report(q, m, c_dt, gap).bound;
    actual[m - 1] = (y - y_star).norm();
  }
  const bool dominated = (bound.array() >= actual.array()).all();
  const Eigen::Index prescribed = prescribe_depth(q, epsilon, c_dt, gap);

  ArtifactSink sink(args.out_dir, "bounds", config, seed, 0);
  const DataTable table = make_table({"depth", "bound", "actual_error"}, {depth, bound, actual});
  sink.csv("bounds.csv", table);
  PlotOptions plot;
  plot.title = "a-priori bound vs measured error";
  plot.x_label = "depth";
  plot.y_label = "error";
  plot.log_y = true;
  sink.plot("bounds.svg", table, plot);
  sink.finish();

  std::cout << "bound dominates measured error at every depth: " << (dominated ? "yes" : "no")
            << "\n";
  std::cout << "prescribed depth for target " << format_double(epsilon) << ": " << prescribed
            << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"solvers for stochastic integral equations of the second kind"};
  app.name("sfie");
  app.require_subcommand(1);

  std::map<std::string, CommonArgs> args;

  CLI::App* linear = app.add_subcommand("linear", "affine fixed-point sweep on a demo kernel");
  add_common(linear, args["linear"]);
  linear->add_flag("--demo", args["linear"].demo,
                   "run the built-in demo problem (ignores --config)");

  CLI::App* dsfnn = app.add_subcommand("dsfnn", "nonlinear fixed-point network");
  add_common(dsfnn, args["dsfnn"]);

  CLI::App* vf = app.add_subcommand("vf", "mixed causal/full kernel network");
  add_common(vf, args["vf"]);

  CLI::App* bs = app.add_subcommand("bs", "option pricing models");
  add_common(bs, args["bs"]);
  bs->add_option("mode", args["bs"].mode, "price, barrier or galerkin")
      ->default_val("price")
      ->check(CLI::IsMember({"price", "barrier", "galerkin"}));
  args["bs"].degree_opt =
      bs->add_option("--degree", args["bs"].degree, "polynomial degree for the galerkin mode");

  CLI::App* contagion = app.add_subcommand("contagion", "interbank distress propagation");
  add_common(contagion, args["contagion"]);

  CLI::App* merton = app.add_subcommand("merton", "learned-kernel jump-diffusion solver");
  add_common(merton, args["merton"]);
  merton->add_option("mode", args["merton"].mode, "run")
      ->default_val("run")
      ->check(CLI::IsMember({"run"}));

  CLI::App* bounds = app.add_subcommand("bounds", "depth prescription and error bounds");
  add_common(bounds, args["bounds"]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  try {
    if (app.got_subcommand(linear)) return cmd_linear(args["linear"]);
    if (app.got_subcommand(dsfnn)) return cmd_dsfnn(args["dsfnn"]);
    if (app.got_subcommand(vf)) return cmd_vf(args["vf"]);
    if (app.got_subcommand(bs)) return cmd_bs(args["bs"]);
    if (app.got_subcommand(contagion)) return cmd_contagion(args["contagion"]);
    if (app.got_subcommand(merton)) return cmd_merton(args["merton"]);
    if (app.got_subcommand(bounds)) return cmd_bounds(args["bounds"]);
  } catch (const divergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 64;
}

}  // namespace sfie::cli
