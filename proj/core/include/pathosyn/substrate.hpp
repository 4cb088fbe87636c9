#pragma once

// Anatomical substrate estimation helpers: the counterfactual healthy
// reference, the substrate objective and deviation-target extraction.
// The learned estimator itself lives in networks.hpp.

#include <concepts>
#include <cstddef>

#include "pathosyn/grid.hpp"
#include "pathosyn/lattice.hpp"

namespace pathosyn {

struct SubstrateLossWeights {
  double lambda_out = 1.0;
  double lambda_in = 0.1;

  void validate() const;
};

struct InpaintOptions {
  int max_iters = 2000;
  double tol = 1e-5;
};

template <std::floating_point T>
struct InpaintResult {
  ImageGrid<T> image;
  bool converged = false;
  int iterations = 0;
  double last_update = 0.0;
};

/// Harmonic fill of the lesion from the surrounding healthy tissue.
/// Healthy sites are returned untouched; lesional sites solve the
/// 4-neighbour discrete Laplace equation (Neumann at the lattice border),
/// relaxed by Jacobi sweeps until the largest update drops below tol.
template <std::floating_point T>
[[nodiscard]] InpaintResult<T> inpaint_reference(const ImageGrid<T>& x, const LesionMask& m,
                                                 InpaintOptions opts = {});

/// lambda_out * ||(x_sub - x) ⊙ m̄||² + lambda_in * ||(x_sub - x_ph) ⊙ m||².
/// With Normalization::per_support each sum is divided by its site count.
template <std::floating_point T>
[[nodiscard]] double substrate_loss(const ImageGrid<T>& x_sub, const ImageGrid<T>& x,
                                    const ImageGrid<T>& x_ph, const LesionMask& m,
                                    const SubstrateLossWeights& w,
                                    Normalization norm = Normalization::unnormalized);

/// d substrate_loss / d x_sub.
template <std::floating_point T>
[[nodiscard]] ImageGrid<T> substrate_loss_gradient(const ImageGrid<T>& x_sub, const ImageGrid<T>& x,
                                                   const ImageGrid<T>& x_ph, const LesionMask& m,
                                                   const SubstrateLossWeights& w,
                                                   Normalization norm = Normalization::unnormalized);

/// r₀ = saturate((x - x_sub) ⊙ m, delta).
template <std::floating_point T>
[[nodiscard]] DeviationField<T> extract_deviation(const ImageGrid<T>& x, const ImageGrid<T>& x_sub,
                                                  const LesionMask& m, T delta);

}  // namespace pathosyn
