#ifndef SFIE_KERNELS_HPP
#define SFIE_KERNELS_HPP

#include <functional>

namespace sfie {

/// How a kernel's support is restricted relative to the evaluation point.
///   Full      -- K(t,s) contributes for every s in the grid.
///   Causal    -- only s <= t contributes (memory kernels, evolution sums).
enum class CausalMask { Full, Causal };

/// Specification of one linear integral operator
///
///   (S y)(t) = g(t) + int K(t,s) y(s) ds + int G(t,s) y(s) dW_s.
///
/// Any of the three pieces may be left empty, meaning identically zero; an
/// equation with no stochastic part simply omits `stochastic_kernel`. The
/// spec is a value type: copies are independent and cheap to pass around.
template <typename Scalar = double>
struct KernelSpec {
  using Kernel = std::function<Scalar(Scalar, Scalar)>;  // (t, s) -> value
  using Forcing = std::function<Scalar(Scalar)>;         // t -> value

  Kernel deterministic_kernel;  // K(t,s); empty => 0
  Kernel stochastic_kernel;     // G(t,s); empty => 0
  Forcing forcing;              // g(t);   empty => 0
  CausalMask causal_mask = CausalMask::Full;

  bool has_deterministic() const { return static_cast<bool>(deterministic_kernel); }
  bool has_stochastic() const { return static_cast<bool>(stochastic_kernel); }
  bool has_forcing() const { return static_cast<bool>(forcing); }

  Scalar deterministic_at(Scalar t, Scalar s) const {
    return has_deterministic() ? deterministic_kernel(t, s) : Scalar(0);
  }
  Scalar stochastic_at(Scalar t, Scalar s) const {
    return has_stochastic() ? stochastic_kernel(t, s) : Scalar(0);
  }
  Scalar forcing_at(Scalar t) const { return has_forcing() ? forcing(t) : Scalar(0); }
};

using KernelSpecD = KernelSpec<double>;

}  // namespace sfie

#endif  // SFIE_KERNELS_HPP
