#pragma once

// Training losses on single subjects. The trainer evaluates the same
// formulas batched on tensors; these versions are the reference used by
// tests and by evaluation code, and carry analytic gradients.

#include <concepts>

#include "pathosyn/grid.hpp"
#include "pathosyn/lattice.hpp"

namespace pathosyn {

struct LossWeights {
  double lambda_diff = 1.0;
  double lambda_dev = 0.5;
  double lambda_syn = 0.5;
  double lambda_pat = 1.0;
  double lambda_ring = 1.0;
  double lambda_leak = 1.0;

  void validate() const;
};

/// A loss value plus a flag raised when its support was empty and the
/// value was defined as 0 (no supervision signal).
struct LossValue {
  double value = 0.0;
  bool empty_support = false;
};

struct LossBreakdown {
  double l_sub = 0.0;
  double l_diff = 0.0;
  double l_dev = 0.0;
  double l_syn = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// ||(eps - eps_hat) ⊙ m||², per mask site by default.
template <std::floating_point T>
[[nodiscard]] LossValue diffusion_loss(const DeviationField<T>& eps, const DeviationField<T>& eps_hat,
                                       const LesionMask& m,
                                       Normalization norm = Normalization::per_support);

/// d diffusion_loss / d eps_hat.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> diffusion_loss_gradient(const DeviationField<T>& eps,
                                                        const DeviationField<T>& eps_hat,
                                                        const LesionMask& m,
                                                        Normalization norm = Normalization::per_support);

/// lambda_pat ||(r̂₀ - r₀) ⊙ m||₁ + lambda_ring ||(r̂₀ - r₀) ⊙ w_ring||₁
///   + lambda_leak ||r̂₀ ⊙ (1 - m)||₁,
/// each term divided by |m|, sum(w_ring) and |1 - m| under per_support.
template <std::floating_point T>
[[nodiscard]] double deviation_loss(const DeviationField<T>& r0_hat, const DeviationField<T>& r0,
                                    const LesionMask& m, const ImageGrid<T>& w_ring,
                                    const LossWeights& w,
                                    Normalization norm = Normalization::per_support);

/// Subgradient of deviation_loss with respect to r̂₀ (sign(0) = 0).
template <std::floating_point T>
[[nodiscard]] DeviationField<T> deviation_loss_gradient(const DeviationField<T>& r0_hat,
                                                        const DeviationField<T>& r0,
                                                        const LesionMask& m,
                                                        const ImageGrid<T>& w_ring,
                                                        const LossWeights& w,
                                                        Normalization norm = Normalization::per_support);

/// ||(x̂ - x) ⊙ S||₁, divided by sum(S) under per_support.
template <std::floating_point T>
[[nodiscard]] LossValue synthesis_loss(const ImageGrid<T>& x_hat, const ImageGrid<T>& x,
                                       const BlendMap<T>& s,
                                       Normalization norm = Normalization::per_support);

template <std::floating_point T>
[[nodiscard]] ImageGrid<T> synthesis_loss_gradient(const ImageGrid<T>& x_hat, const ImageGrid<T>& x,
                                                   const BlendMap<T>& s,
                                                   Normalization norm = Normalization::per_support);

/// L = l_sub + lambda_diff l_diff + lambda_dev l_dev + lambda_syn l_syn.
[[nodiscard]] LossBreakdown total_loss(double l_sub, double l_diff, double l_dev, double l_syn,
                                       const LossWeights& w);

}  // namespace pathosyn
