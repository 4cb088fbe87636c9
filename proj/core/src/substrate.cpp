#include "pathosyn/substrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pathosyn {

void SubstrateLossWeights::validate() const {
  if (!(lambda_out > 0.0) || !(lambda_in > 0.0) || !std::isfinite(lambda_out) ||
      !std::isfinite(lambda_in)) {
    throw InvalidArgument("SubstrateLossWeights: lambda_out and lambda_in must be positive");
  }
}

template <std::floating_point T>
InpaintResult<T> inpaint_reference(const ImageGrid<T>& x, const LesionMask& m, InpaintOptions opts) {
  require_same_shape(x.shape(), m.shape(), "inpaint_reference");
  if (opts.max_iters <= 0 || !(opts.tol > 0.0)) {
    throw InvalidArgument("inpaint_reference: max_iters and tol must be positive");
  }
  if (m.full()) throw InvalidArgument("inpaint_reference: no healthy context (mask covers the image)");

  InpaintResult<T> result{x, true, 0, 0.0};
  if (m.empty()) return result;

  const int h = x.height();
  const int w = x.width();
  std::vector<std::size_t> unknown;
  double boundary_sum = 0.0;
  std::size_t boundary_n = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (m(i, j)) {
        unknown.push_back(static_cast<std::size_t>(i * w + j));
        continue;
      }
      const bool touches = (i > 0 && m(i - 1, j)) || (i + 1 < h && m(i + 1, j)) ||
                           (j > 0 && m(i, j - 1)) || (j + 1 < w && m(i, j + 1));
      if (touches) {
        boundary_sum += static_cast<double>(x(i, j));
        ++boundary_n;
      }
    }
  }
  // A mask that is not full always has at least one healthy site adjacent
  // to it, so boundary_n > 0 here.
  const double start = boundary_sum / static_cast<double>(boundary_n);

  // Relax in double; the unknowns are a small subset of the lattice.
  std::vector<double> cur(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) cur[k] = static_cast<double>(x[k]);
  for (std::size_t k : unknown) cur[k] = start;
  std::vector<double> next = cur;

  result.converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    double max_update = 0.0;
    for (std::size_t k : unknown) {
      const int i = static_cast<int>(k) / w;
      const int j = static_cast<int>(k) % w;
      double sum = 0.0;
      int n = 0;
      if (i > 0) { sum += cur[k - static_cast<std::size_t>(w)]; ++n; }
      if (i + 1 < h) { sum += cur[k + static_cast<std::size_t>(w)]; ++n; }
      if (j > 0) { sum += cur[k - 1]; ++n; }
      if (j + 1 < w) { sum += cur[k + 1]; ++n; }
      next[k] = sum / n;
      max_update = std::max(max_update, std::abs(next[k] - cur[k]));
    }
    for (std::size_t k : unknown) cur[k] = next[k];
    result.iterations = it;
    result.last_update = max_update;
    if (max_update < opts.tol) {
      result.converged = true;
      break;
    }
  }
  for (std::size_t k : unknown) result.image[k] = static_cast<T>(cur[k]);
  return result;
}

namespace {

struct SubstrateTerms {
  double out_scale;
  double in_scale;
};

SubstrateTerms substrate_scales(const LesionMask& m, const SubstrateLossWeights& w, Normalization norm) {
  if (norm == Normalization::unnormalized) return {w.lambda_out, w.lambda_in};
  const auto n_in = static_cast<double>(m.count());
  const double n_out = static_cast<double>(m.size()) - n_in;
  return {n_out > 0 ? w.lambda_out / n_out : 0.0, n_in > 0 ? w.lambda_in / n_in : 0.0};
}

}  // namespace

template <std::floating_point T>
double substrate_loss(const ImageGrid<T>& x_sub, const ImageGrid<T>& x, const ImageGrid<T>& x_ph,
                      const LesionMask& m, const SubstrateLossWeights& w, Normalization norm) {
  require_same_shape(x_sub.shape(), x.shape(), "substrate_loss");
  require_same_shape(x_sub.shape(), x_ph.shape(), "substrate_loss");
  require_same_shape(x_sub.shape(), m.shape(), "substrate_loss");
  w.validate();
  double out_sum = 0.0;
  double in_sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (m[k]) {
      const double d = static_cast<double>(x_sub[k]) - static_cast<double>(x_ph[k]);
      in_sum += d * d;
    } else {
      const double d = static_cast<double>(x_sub[k]) - static_cast<double>(x[k]);
      out_sum += d * d;
    }
  }
  const SubstrateTerms s = substrate_scales(m, w, norm);
  return s.out_scale * out_sum + s.in_scale * in_sum;
}

template <std::floating_point T>
ImageGrid<T> substrate_loss_gradient(const ImageGrid<T>& x_sub, const ImageGrid<T>& x,
                                     const ImageGrid<T>& x_ph, const LesionMask& m,
                                     const SubstrateLossWeights& w, Normalization norm) {
  require_same_shape(x_sub.shape(), x.shape(), "substrate_loss_gradient");
  require_same_shape(x_sub.shape(), x_ph.shape(), "substrate_loss_gradient");
  require_same_shape(x_sub.shape(), m.shape(), "substrate_loss_gradient");
  w.validate();
  const SubstrateTerms s = substrate_scales(m, w, norm);
  ImageGrid<T> g(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    g[k] = m[k] ? static_cast<T>(2.0 * s.in_scale * (static_cast<double>(x_sub[k]) - x_ph[k]))
                : static_cast<T>(2.0 * s.out_scale * (static_cast<double>(x_sub[k]) - x[k]));
  }
  return g;
}

template <std::floating_point T>
DeviationField<T> extract_deviation(const ImageGrid<T>& x, const ImageGrid<T>& x_sub,
                                    const LesionMask& m, T delta) {
  require_same_shape(x.shape(), x_sub.shape(), "extract_deviation");
  require_same_shape(x.shape(), m.shape(), "extract_deviation");
  if (!(delta > T(0))) throw InvalidArgument("extract_deviation: delta must be positive");
  DeviationField<T> r(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) r[k] = m[k] ? x[k] - x_sub[k] : T(0);
  return saturate(r, delta);
}

#define PATHOSYN_INSTANTIATE(T)                                                                   \
  template InpaintResult<T> inpaint_reference(const ImageGrid<T>&, const LesionMask&,             \
                                              InpaintOptions);                                    \
  template double substrate_loss(const ImageGrid<T>&, const ImageGrid<T>&, const ImageGrid<T>&,   \
                                 const LesionMask&, const SubstrateLossWeights&, Normalization);  \
  template ImageGrid<T> substrate_loss_gradient(const ImageGrid<T>&, const ImageGrid<T>&,         \
                                                const ImageGrid<T>&, const LesionMask&,           \
                                                const SubstrateLossWeights&, Normalization);      \
  template DeviationField<T> extract_deviation(const ImageGrid<T>&, const ImageGrid<T>&,          \
                                               const LesionMask&, T);

PATHOSYN_INSTANTIATE(float)
PATHOSYN_INSTANTIATE(double)
#undef PATHOSYN_INSTANTIATE

}  // namespace pathosyn
