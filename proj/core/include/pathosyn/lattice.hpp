#pragma once

// Mask algebra and the elementwise lattice operations shared by every
// pipeline stage. All functions are pure.

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "pathosyn/grid.hpp"

namespace pathosyn {

inline constexpr double kDefaultBlendSigma = 2.0;
inline constexpr double kDefaultSaturationDelta = 1.0;

/// How masked loss sums are scaled. per_support divides each term by the
/// size (or total weight) of its own support so loss weights transfer
/// across lesion sizes; unnormalized keeps the plain sums.
enum class Normalization { per_support, unnormalized };

[[nodiscard]] LesionMask complement(const LesionMask& m);

/// Isotropic Gaussian truncated to the disk of radius ceil(3*sigma) and
/// normalized to unit sum. Weights are laid out row-major over the
/// (2r+1)x(2r+1) window; entries outside the disk are zero.
struct TruncatedGaussian {
  int radius = 0;
  double sigma = 0.0;
  std::vector<double> weights;

  [[nodiscard]] int side() const noexcept { return 2 * radius + 1; }
  [[nodiscard]] double at(int di, int dj) const {
    return weights[static_cast<std::size_t>((di + radius) * side() + (dj + radius))];
  }
};

[[nodiscard]] TruncatedGaussian truncated_gaussian(double sigma);

namespace detail {
std::vector<double> smooth_mask_f64(const LesionMask& m, double sigma_blend);
}

/// S = G_sigma * m, edge-replicated at the lattice border and clamped to
/// [0,1]. Exactly m wherever the kernel window is uniform, exactly 0
/// farther than the truncation radius from the lesion.
template <std::floating_point T = float>
[[nodiscard]] BlendMap<T> smooth_mask(const LesionMask& m, double sigma_blend = kDefaultBlendSigma) {
  const std::vector<double> s = detail::smooth_mask_f64(m, sigma_blend);
  BlendMap<T> out(m.shape());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = static_cast<T>(s[k]);
  return out;
}

/// w_ring = 4 S (1 - S).
template <std::floating_point T>
[[nodiscard]] ImageGrid<T> ring_weight(const BlendMap<T>& s) {
  ImageGrid<T> out(s.shape());
  for (std::size_t k = 0; k < s.size(); ++k) out[k] = T(4) * s[k] * (T(1) - s[k]);
  return out;
}

/// field ⊙ m. Lesional sites are copied bit-for-bit, the rest set to 0.
template <std::floating_point T, class Tag>
[[nodiscard]] Grid<T, Tag> apply_support(const Grid<T, Tag>& field, const LesionMask& m) {
  require_same_shape(field.shape(), m.shape(), "apply_support");
  Grid<T, Tag> out(field.shape());
  for (std::size_t k = 0; k < field.size(); ++k) out[k] = m[k] ? field[k] : T(0);
  return out;
}

/// Pointwise delta * tanh(x / delta), capped strictly below delta in
/// magnitude (tanh rounds to 1 for large arguments).
template <std::floating_point T>
[[nodiscard]] T saturate_value(T x, T delta) {
  const T cap = std::nextafter(delta, T(0));
  const T y = delta * std::tanh(x / delta);
  if (y > cap) return cap;
  if (y < -cap) return -cap;
  return y;
}

template <std::floating_point T>
[[nodiscard]] DeviationField<T> saturate(const DeviationField<T>& r, T delta) {
  if (!(delta > T(0))) throw InvalidArgument("saturate: delta must be positive");
  DeviationField<T> out(r.shape());
  for (std::size_t k = 0; k < r.size(); ++k) out[k] = saturate_value(r[k], delta);
  return out;
}

/// x̂ = x_sub + S ⊙ r̂₀. Not clamped; sites with S = 0 return x_sub exactly.
template <std::floating_point T>
[[nodiscard]] ImageGrid<T> recompose(const ImageGrid<T>& x_sub, const DeviationField<T>& r_hat,
                                     const BlendMap<T>& s) {
  require_same_shape(x_sub.shape(), r_hat.shape(), "recompose");
  require_same_shape(x_sub.shape(), s.shape(), "recompose");
  ImageGrid<T> out(x_sub.shape());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = s[k] == T(0) ? x_sub[k] : x_sub[k] + s[k] * r_hat[k];
  }
  return out;
}

/// Export-time clamp to [0,1]; display only.
template <std::floating_point T>
[[nodiscard]] ImageGrid<T> clamp_unit(const ImageGrid<T>& x) {
  ImageGrid<T> out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::clamp(x[k], T(0), T(1));
  return out;
}

/// max |field| over the complement of m; 0 means the field is supported on m.
template <std::floating_point T, class Tag>
[[nodiscard]] T max_abs_outside(const Grid<T, Tag>& field, const LesionMask& m) {
  require_same_shape(field.shape(), m.shape(), "max_abs_outside");
  T best = 0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (!m[k]) best = std::max(best, std::abs(field[k]));
  }
  return best;
}

}  // namespace pathosyn
