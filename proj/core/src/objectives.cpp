#include "pathosyn/objectives.hpp"

#include <cmath>
#include <string>

namespace pathosyn {

void LossWeights::validate() const {
  for (double v : {lambda_diff, lambda_dev, lambda_syn, lambda_pat, lambda_ring, lambda_leak}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("LossWeights: every lambda must be finite and nonnegative");
    }
  }
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double scale_for(double support, Normalization norm) {
  if (norm == Normalization::unnormalized) return 1.0;
  return support > 0.0 ? 1.0 / support : 0.0;
}

struct DeviationScales {
  double pat;
  double ring;
  double leak;
};

template <std::floating_point T>
DeviationScales deviation_scales(const LesionMask& m, const ImageGrid<T>& w_ring, const LossWeights& w,
                                 Normalization norm) {
  double ring_mass = 0.0;
  for (T v : w_ring.values()) ring_mass += static_cast<double>(v);
  const auto inside = static_cast<double>(m.count());
  const double outside = static_cast<double>(m.size()) - inside;
  return {w.lambda_pat * scale_for(inside, norm), w.lambda_ring * scale_for(ring_mass, norm),
          w.lambda_leak * scale_for(outside, norm)};
}

}  // namespace

template <std::floating_point T>
LossValue diffusion_loss(const DeviationField<T>& eps, const DeviationField<T>& eps_hat,
                         const LesionMask& m, Normalization norm) {
  require_same_shape(eps.shape(), eps_hat.shape(), "diffusion_loss");
  require_same_shape(eps.shape(), m.shape(), "diffusion_loss");
  const std::size_t n = m.count();
  if (n == 0) return {0.0, true};
  double sum = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!m[k]) continue;
    const double d = static_cast<double>(eps[k]) - static_cast<double>(eps_hat[k]);
    sum += d * d;
  }
  return {sum * scale_for(static_cast<double>(n), norm), false};
}

template <std::floating_point T>
DeviationField<T> diffusion_loss_gradient(const DeviationField<T>& eps, const DeviationField<T>& eps_hat,
                                          const LesionMask& m, Normalization norm) {
  require_same_shape(eps.shape(), eps_hat.shape(), "diffusion_loss_gradient");
  require_same_shape(eps.shape(), m.shape(), "diffusion_loss_gradient");
  const double scale = scale_for(static_cast<double>(m.count()), norm);
  DeviationField<T> g(eps.shape());
  for (std::size_t k = 0; k < eps.size(); ++k) {
    g[k] = m[k] ? static_cast<T>(2.0 * scale * (static_cast<double>(eps_hat[k]) - eps[k])) : T(0);
  }
  return g;
}

template <std::floating_point T>
double deviation_loss(const DeviationField<T>& r0_hat, const DeviationField<T>& r0, const LesionMask& m,
                      const ImageGrid<T>& w_ring, const LossWeights& w, Normalization norm) {
  require_same_shape(r0_hat.shape(), r0.shape(), "deviation_loss");
  require_same_shape(r0_hat.shape(), m.shape(), "deviation_loss");
  require_same_shape(r0_hat.shape(), w_ring.shape(), "deviation_loss");
  w.validate();
  double pat = 0.0;
  double ring = 0.0;
  double leak = 0.0;
  for (std::size_t k = 0; k < r0.size(); ++k) {
    const double d = static_cast<double>(r0_hat[k]) - static_cast<double>(r0[k]);
    if (m[k]) {
      pat += std::abs(d);
    } else {
      leak += std::abs(static_cast<double>(r0_hat[k]));
    }
    ring += std::abs(d * static_cast<double>(w_ring[k]));
  }
  const DeviationScales s = deviation_scales(m, w_ring, w, norm);
  return s.pat * pat + s.ring * ring + s.leak * leak;
}

template <std::floating_point T>
DeviationField<T> deviation_loss_gradient(const DeviationField<T>& r0_hat, const DeviationField<T>& r0,
                                          const LesionMask& m, const ImageGrid<T>& w_ring,
                                          const LossWeights& w, Normalization norm) {
  require_same_shape(r0_hat.shape(), r0.shape(), "deviation_loss_gradient");
  require_same_shape(r0_hat.shape(), m.shape(), "deviation_loss_gradient");
  require_same_shape(r0_hat.shape(), w_ring.shape(), "deviation_loss_gradient");
  w.validate();
  const DeviationScales s = deviation_scales(m, w_ring, w, norm);
  DeviationField<T> g(r0.shape());
  for (std::size_t k = 0; k < r0.size(); ++k) {
    const double d = static_cast<double>(r0_hat[k]) - static_cast<double>(r0[k]);
    const double wr = static_cast<double>(w_ring[k]);
    double v = s.ring * std::abs(wr) * sign(d);
    v += m[k] ? s.pat * sign(d) : s.leak * sign(static_cast<double>(r0_hat[k]));
    g[k] = static_cast<T>(v);
  }
  return g;
}

template <std::floating_point T>
LossValue synthesis_loss(const ImageGrid<T>& x_hat, const ImageGrid<T>& x, const BlendMap<T>& s,
                         Normalization norm) {
  require_same_shape(x_hat.shape(), x.shape(), "synthesis_loss");
  require_same_shape(x_hat.shape(), s.shape(), "synthesis_loss");
  double mass = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double sk = static_cast<double>(s[k]);
    mass += sk;
    sum += std::abs(static_cast<double>(x_hat[k]) - static_cast<double>(x[k])) * sk;
  }
  if (mass == 0.0) return {0.0, true};
  return {sum * scale_for(mass, norm), false};
}

template <std::floating_point T>
ImageGrid<T> synthesis_loss_gradient(const ImageGrid<T>& x_hat, const ImageGrid<T>& x,
                                     const BlendMap<T>& s, Normalization norm) {
  require_same_shape(x_hat.shape(), x.shape(), "synthesis_loss_gradient");
  require_same_shape(x_hat.shape(), s.shape(), "synthesis_loss_gradient");
  double mass = 0.0;
  for (T v : s.values()) mass += static_cast<double>(v);
  const double scale = scale_for(mass, norm);
  ImageGrid<T> g(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    g[k] = static_cast<T>(scale * static_cast<double>(s[k]) *
                          sign(static_cast<double>(x_hat[k]) - static_cast<double>(x[k])));
  }
  return g;
}

LossBreakdown total_loss(double l_sub, double l_diff, double l_dev, double l_syn, const LossWeights& w) {
  w.validate();
  const char* names[] = {"l_sub", "l_diff", "l_dev", "l_syn"};
  const double vals[] = {l_sub, l_diff, l_dev, l_syn};
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(vals[i])) {
      throw NumericalError(std::string("total_loss: non-finite ") + names[i]);
    }
  }
  LossBreakdown b{l_sub, l_diff, l_dev, l_syn, 0.0};
  b.total = l_sub + w.lambda_diff * l_diff + w.lambda_dev * l_dev + w.lambda_syn * l_syn;
  return b;
}

#define PATHOSYN_INSTANTIATE(T)                                                                     \
  template LossValue diffusion_loss(const DeviationField<T>&, const DeviationField<T>&,             \
                                    const LesionMask&, Normalization);                              \
  template DeviationField<T> diffusion_loss_gradient(const DeviationField<T>&,                      \
                                                     const DeviationField<T>&, const LesionMask&,   \
                                                     Normalization);                                \
  template double deviation_loss(const DeviationField<T>&, const DeviationField<T>&,                \
                                 const LesionMask&, const ImageGrid<T>&, const LossWeights&,        \
                                 Normalization);                                                    \
  template DeviationField<T> deviation_loss_gradient(const DeviationField<T>&,                      \
                                                     const DeviationField<T>&, const LesionMask&,   \
                                                     const ImageGrid<T>&, const LossWeights&,       \
                                                     Normalization);                                \
  template LossValue synthesis_loss(const ImageGrid<T>&, const ImageGrid<T>&, const BlendMap<T>&,   \
                                    Normalization);                                                 \
  template ImageGrid<T> synthesis_loss_gradient(const ImageGrid<T>&, const ImageGrid<T>&,           \
                                                const BlendMap<T>&, Normalization);

PATHOSYN_INSTANTIATE(float)
PATHOSYN_INSTANTIATE(double)
#undef PATHOSYN_INSTANTIATE

}  // namespace pathosyn
