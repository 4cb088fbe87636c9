#include "pathosyn/lattice.hpp"

#include <algorithm>

namespace pathosyn {

LesionMask complement(const LesionMask& m) {
  std::vector<std::uint8_t> bits(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) bits[k] = m[k] ? 0 : 1;
  return LesionMask(m.shape(), std::move(bits));
}

TruncatedGaussian truncated_gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("smooth_mask: sigma_blend must be positive");
  }
  TruncatedGaussian k;
  k.sigma = sigma;
  k.radius = static_cast<int>(std::ceil(3.0 * sigma));
  const int r = k.radius;
  k.weights.assign(static_cast<std::size_t>(k.side() * k.side()), 0.0);
  double total = 0.0;
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      const int d2 = di * di + dj * dj;
      if (d2 > r * r) continue;
      const double w = std::exp(-static_cast<double>(d2) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>((di + r) * k.side() + (dj + r))] = w;
      total += w;
    }
  }
  for (double& w : k.weights) w /= total;
  return k;
}

namespace detail {

std::vector<double> smooth_mask_f64(const LesionMask& m, double sigma_blend) {
  const TruncatedGaussian kernel = truncated_gaussian(sigma_blend);
  const int h = m.height();
  const int w = m.width();
  const int r = kernel.radius;
  std::vector<double> out(m.size(), 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      // num and den accumulate in the same order, so a window lying fully
      // inside the lesion yields num == den and S == 1 exactly.
      double num = 0.0;
      double den = 0.0;
      for (int di = -r; di <= r; ++di) {
        const int ii = std::clamp(i + di, 0, h - 1);
        for (int dj = -r; dj <= r; ++dj) {
          const double wk = kernel.at(di, dj);
          if (wk == 0.0) continue;
          const int jj = std::clamp(j + dj, 0, w - 1);
          den += wk;
          if (m(ii, jj)) num += wk;
        }
      }
      out[static_cast<std::size_t>(i * w + j)] = std::clamp(num / den, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace detail

}  // namespace pathosyn
