#ifndef SFIE_NEURAL_KERNEL_HPP
#define SFIE_NEURAL_KERNEL_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sfie/errors.hpp"
#include "sfie/rng.hpp"

namespace sfie {

/// Two-hidden-layer tanh MLP (2 -> 32 -> 32 -> 1) used as a learned
/// replacement for a deterministic kernel K(t, s). Inputs are min-max
/// normalized to [0, 1] before the first layer so the tanh units see O(1)
/// activations regardless of the grid's physical scale.
///
/// Parameters flatten in the fixed order [W1, b1, W2, b2, w3, b3] (matrices
/// column-major), which the gradient, the SGD update and the checkpoint
/// format all share.
class NeuralKernel {
 public:
  static constexpr Eigen::Index kInputs = 2;
  static constexpr Eigen::Index kHidden = 32;

  Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(kHidden, kInputs);
  Eigen::VectorXd b1 = Eigen::VectorXd::Zero(kHidden);
  Eigen::MatrixXd W2 = Eigen::MatrixXd::Zero(kHidden, kHidden);
  Eigen::VectorXd b2 = Eigen::VectorXd::Zero(kHidden);
  Eigen::VectorXd w3 = Eigen::VectorXd::Zero(kHidden);
  double b3 = 0.0;

  /// 2*32 + 32 + 32*32 + 32 + 32 + 1.
  static constexpr Eigen::Index parameter_count() {
    return kHidden * kInputs + kHidden + kHidden * kHidden + kHidden + kHidden + 1;
  }

  /// Input normalization window; forward maps t -> (t - t_lo) / (t_hi - t_lo)
  /// and likewise for s. Defaults to the identity on [0, 1].
  void set_normalization(double t_lo, double t_hi, double s_lo, double s_hi) {
    if (!(t_hi > t_lo) || !(s_hi > s_lo))
      throw config_error("NeuralKernel::set_normalization: empty input window");
    t_lo_ = t_lo;
    t_scale_ = 1.0 / (t_hi - t_lo);
    s_lo_ = s_lo;
    s_scale_ = 1.0 / (s_hi - s_lo);
  }

  double normalized_t(double t) const { return (t - t_lo_) * t_scale_; }
  double normalized_s(double s) const { return (s - s_lo_) * s_scale_; }

  double operator()(double t, double s) const {
    Eigen::Vector2d x(normalized_t(t), normalized_s(s));
    const Eigen::VectorXd h1 = (W1 * x + b1).array().tanh();
    const Eigen::VectorXd h2 = (W2 * h1 + b2).array().tanh();
    return w3.dot(h2) + b3;
  }

  Eigen::VectorXd to_flat() const {
    Eigen::VectorXd theta(parameter_count());
    Eigen::Index at = 0;
    theta.segment(at, W1.size()) = Eigen::Map<const Eigen::VectorXd>(W1.data(), W1.size());
    at += W1.size();
    theta.segment(at, b1.size()) = b1;
    at += b1.size();
    theta.segment(at, W2.size()) = Eigen::Map<const Eigen::VectorXd>(W2.data(), W2.size());
    at += W2.size();
    theta.segment(at, b2.size()) = b2;
    at += b2.size();
    theta.segment(at, w3.size()) = w3;
    at += w3.size();
    theta[at] = b3;
    return theta;
  }

  void from_flat(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count())
      throw dimension_error("NeuralKernel::from_flat: parameter vector has wrong size");
    Eigen::Index at = 0;
    Eigen::Map<Eigen::VectorXd>(W1.data(), W1.size()) = theta.segment(at, W1.size());
    at += W1.size();
    b1 = theta.segment(at, b1.size());
    at += b1.size();
    Eigen::Map<Eigen::VectorXd>(W2.data(), W2.size()) = theta.segment(at, W2.size());
    at += W2.size();
    b2 = theta.segment(at, b2.size());
    at += b2.size();
    w3 = theta.segment(at, w3.size());
    at += w3.size();
    b3 = theta[at];
  }

 private:
  double t_lo_ = 0.0;
  double t_scale_ = 1.0;
  double s_lo_ = 0.0;
  double s_scale_ = 1.0;

  friend bool save_kernel(const std::string&, const NeuralKernel&);
  friend NeuralKernel load_kernel(const std::string&);
};

/// Fresh kernel with weights uniform on (-gain/sqrt(fan_in), +gain/sqrt(fan_in))
/// and zero biases, drawn from the `init` substream of the given seed.
inline NeuralKernel seeded_kernel(RandomSeed seed, double gain = 1.0) {
  const CounterRng rng = CounterRng(seed).fork(substream::init);
  std::uint64_t draw = 0;
  const auto fill = [&](Eigen::Ref<Eigen::MatrixXd> m, Eigen::Index fan_in) {
    const double bound = gain / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        m(r, c) = bound * (2.0 * rng.uniform(draw++) - 1.0);
  };
  NeuralKernel net;
  fill(net.W1, NeuralKernel::kInputs);
  fill(net.W2, NeuralKernel::kHidden);
  fill(net.w3, NeuralKernel::kHidden);
  return net;  // biases stay zero
}

/// Restart used between training sweeps: a new draw deterministically derived
/// from the base seed and the sweep index.
inline NeuralKernel reinitialized_kernel(RandomSeed seed, Eigen::Index sweep, double gain = 1.0) {
  return seeded_kernel(
      RandomSeed{seed.seed ^ detail::mix64(static_cast<std::uint64_t>(sweep) + 1), seed.stream_id},
      gain);
}

/// Kernel matrix M(i, j) = net(t[i], s[j]) evaluated as one batched forward
/// pass (inputs packed 2 x (nt*ns), column c = i + j*nt).
inline Eigen::MatrixXd kernel_matrix(const NeuralKernel& net, const Eigen::VectorXd& t,
                                     const Eigen::VectorXd& s) {
  const Eigen::Index nt = t.size();
  const Eigen::Index ns = s.size();
  Eigen::MatrixXd x(2, nt * ns);
  for (Eigen::Index j = 0; j < ns; ++j)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index c = i + j * nt;
      x(0, c) = net.normalized_t(t[i]);
      x(1, c) = net.normalized_s(s[j]);
    }
  const Eigen::MatrixXd h1 = ((net.W1 * x).colwise() + net.b1).array().tanh();
  const Eigen::MatrixXd h2 = ((net.W2 * h1).colwise() + net.b2).array().tanh();
  const Eigen::RowVectorXd out = (net.w3.transpose() * h2).array() + net.b3;
  return Eigen::Map<const Eigen::MatrixXd>(out.data(), nt, ns);
}

/// Gradient of a scalar loss with respect to the flat parameter vector, given
/// the upstream gradient dL/dM on the kernel matrix M = kernel_matrix(t, s).
/// One batched backward pass through the same computation as kernel_matrix.
inline Eigen::VectorXd parameter_gradient(const NeuralKernel& net, const Eigen::VectorXd& t,
                                          const Eigen::VectorXd& s,
                                          const Eigen::MatrixXd& d_kernel) {
  const Eigen::Index nt = t.size();
  const Eigen::Index ns = s.size();
  if (d_kernel.rows() != nt || d_kernel.cols() != ns)
    throw dimension_error("parameter_gradient: upstream gradient has wrong shape");

  Eigen::MatrixXd x(2, nt * ns);
  for (Eigen::Index j = 0; j < ns; ++j)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index c = i + j * nt;
      x(0, c) = net.normalized_t(t[i]);
      x(1, c) = net.normalized_s(s[j]);
    }
  const Eigen::MatrixXd h1 = ((net.W1 * x).colwise() + net.b1).array().tanh();
  const Eigen::MatrixXd h2 = ((net.W2 * h1).colwise() + net.b2).array().tanh();

  const Eigen::RowVectorXd dout = Eigen::Map<const Eigen::RowVectorXd>(d_kernel.data(), nt * ns);
  // Output layer: out = w3' h2 + b3.
  const Eigen::VectorXd d_w3 = h2 * dout.transpose();
  const double d_b3 = dout.sum();
  // Hidden layer 2: h2 = tanh(W2 h1 + b2).
  const Eigen::MatrixXd d_z2 =
      (net.w3 * dout).cwiseProduct((1.0 - h2.array().square()).matrix());
  const Eigen::MatrixXd d_w2 = d_z2 * h1.transpose();
  const Eigen::VectorXd d_b2 = d_z2.rowwise().sum();
  // Hidden layer 1: h1 = tanh(W1 x + b1).
  const Eigen::MatrixXd d_z1 =
      (net.W2.transpose() * d_z2).cwiseProduct((1.0 - h1.array().square()).matrix());
  const Eigen::MatrixXd d_w1 = d_z1 * x.transpose();
  const Eigen::VectorXd d_b1 = d_z1.rowwise().sum();

  Eigen::VectorXd grad(NeuralKernel::parameter_count());
  Eigen::Index at = 0;
  grad.segment(at, d_w1.size()) = Eigen::Map<const Eigen::VectorXd>(d_w1.data(), d_w1.size());
  at += d_w1.size();
  grad.segment(at, d_b1.size()) = d_b1;
  at += d_b1.size();
  grad.segment(at, d_w2.size()) = Eigen::Map<const Eigen::VectorXd>(d_w2.data(), d_w2.size());
  at += d_w2.size();
  grad.segment(at, d_b2.size()) = d_b2;
  at += d_b2.size();
  grad.segment(at, d_w3.size()) = d_w3;
  at += d_w3.size();
  grad[at] = d_b3;
  return grad;
}

/// Plain SGD step on a flat parameter vector. Shared by the kernel training
/// loop and by anything else that wants the identical update rule. A zero
/// learning rate is a legal no-op step (useful for dry runs); negative rates
/// are rejected.
inline void sgd_update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double learning_rate) {
  if (theta.size() != grad.size()) throw dimension_error("sgd_update: size mismatch");
  if (learning_rate < 0.0) throw config_error("sgd_update: learning rate must be >= 0");
  theta -= learning_rate * grad;
}

inline void sgd_update(NeuralKernel& net, const Eigen::VectorXd& grad, double learning_rate) {
  Eigen::VectorXd theta = net.to_flat();
  sgd_update(theta, grad, learning_rate);
  net.from_flat(theta);
}

/// Bookkeeping for one training run. `loss_history` spans every restart
/// sweep; `moving_average[i]` is the mean of the last ten (or fewer, near the
/// start) entries of `loss_history` up to and including slot `i`, so the two
/// vectors always have equal length. `sweep_history[i]` records which restart
/// sweep produced slot `i`.
struct TrainState {
  static constexpr std::size_t kAverageWindow = 10;

  Eigen::Index step = 0;  // global step counter across sweeps
  double learning_rate = 1e-2;
  Eigen::Index sweep = 0;  // restart counter
  std::vector<double> loss_history;
  std::vector<double> moving_average;
  std::vector<Eigen::Index> sweep_history;

  /// Record one loss sample and extend the running window average.
  void append_loss(double loss) {
    loss_history.push_back(loss);
    const std::size_t take = std::min(kAverageWindow, loss_history.size());
    double sum = 0.0;
    for (std::size_t i = loss_history.size() - take; i < loss_history.size(); ++i)
      sum += loss_history[i];
    moving_average.push_back(sum / static_cast<double>(take));
    sweep_history.push_back(sweep);
  }

  /// Latest window average, or 0 before any losses are recorded.
  double current_average() const { return moving_average.empty() ? 0.0 : moving_average.back(); }
};

/// Thrown when a training step produces a non-finite loss or gradient. Carries
/// a snapshot of the run state at the point of failure so callers can inspect
/// the loss trace that led up to it.
class training_error : public std::runtime_error {
 public:
  training_error(const std::string& what, TrainState snapshot)
      : std::runtime_error(what), state_(std::move(snapshot)) {}

  const TrainState& state() const noexcept { return state_; }

 private:
  TrainState state_;
};

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary file holding the normalization window and
// the flat parameter vector.
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kKernelMagic[8] = {'S', 'F', 'N', 'K', '0', '0', '0', '1'};
}

inline bool save_kernel(const std::string& path, const NeuralKernel& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out.write(detail::kKernelMagic, sizeof(detail::kKernelMagic));
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(NeuralKernel::kInputs),
                                 static_cast<std::uint64_t>(NeuralKernel::kHidden)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const double window[4] = {net.t_lo_, net.t_scale_, net.s_lo_, net.s_scale_};
  out.write(reinterpret_cast<const char*>(window), sizeof(window));
  const Eigen::VectorXd theta = net.to_flat();
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(sizeof(double) * theta.size()));
  return static_cast<bool>(out);
}

inline NeuralKernel load_kernel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("load_kernel: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, detail::kKernelMagic))
    throw config_error("load_kernel: '" + path + "' is not a kernel checkpoint");
  std::uint64_t dims[2];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] != NeuralKernel::kInputs || dims[1] != NeuralKernel::kHidden)
    throw config_error("load_kernel: checkpoint layer sizes do not match this build");
  double window[4];
  in.read(reinterpret_cast<char*>(window), sizeof(window));
  Eigen::VectorXd theta(NeuralKernel::parameter_count());
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(sizeof(double) * theta.size()));
  if (!in) throw config_error("load_kernel: checkpoint truncated");
  NeuralKernel net;
  net.t_lo_ = window[0];
  net.t_scale_ = window[1];
  net.s_lo_ = window[2];
  net.s_scale_ = window[3];
  net.from_flat(theta);
  return net;
}

}  // namespace sfie

#endif  // SFIE_NEURAL_KERNEL_HPP
