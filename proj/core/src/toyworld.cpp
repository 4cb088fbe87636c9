#include "pathosyn/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pathosyn/lattice.hpp"
#include "pathosyn/substrate.hpp"

namespace pathosyn {

void Interval::validate(const char* name) const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw InvalidArgument(std::string("ToyParams: invalid range for ") + name);
  }
}

ToyParams ToyParams::for_resolution(int resolution) {
  ToyParams p;
  if (resolution <= 0) throw InvalidArgument("ToyParams: resolution must be positive");
  const double f = resolution / 64.0;
  p.resolution = resolution;
  for (Interval* iv : {&p.head_semi_major, &p.head_semi_minor, &p.ventricle_semi_major,
                       &p.ventricle_semi_minor, &p.lesion_radius}) {
    iv->lo *= f;
    iv->hi *= f;
  }
  p.skull_thickness *= f;
  p.texture_length *= f;
  return p;
}

void ToyParams::validate() const {
  if (resolution < 8) throw InvalidArgument("ToyParams: resolution must be >= 8");
  head_semi_major.validate("head_semi_major");
  head_semi_minor.validate("head_semi_minor");
  ventricle_semi_major.validate("ventricle_semi_major");
  ventricle_semi_minor.validate("ventricle_semi_minor");
  skull_intensity.validate("skull_intensity");
  brain_intensity.validate("brain_intensity");
  ventricle_intensity.validate("ventricle_intensity");
  lesion_radius.validate("lesion_radius");
  amplitude.validate("amplitude");
  if (min_lesions < 0 || max_lesions < min_lesions) {
    throw InvalidArgument("ToyParams: need 0 <= min_lesions <= max_lesions");
  }
  if (head_semi_major.hi * 2 >= resolution || head_semi_minor.hi * 2 >= resolution) {
    throw InvalidArgument("ToyParams: head ellipse does not fit the lattice");
  }
  if (lesion_radius.lo <= 0.0) throw InvalidArgument("ToyParams: lesion radius must be positive");
  if (noise_std < 0.0 || bias_amplitude < 0.0 || texture_strength < 0.0 || texture_length < 0.0 ||
      anatomy_smoothing < 0.0 || skull_thickness < 0.0) {
    throw InvalidArgument("ToyParams: negative scale parameter");
  }
  if (negative_fraction < 0.0 || negative_fraction > 1.0) {
    throw InvalidArgument("ToyParams: negative_fraction must lie in [0,1]");
  }
}

std::string subject_id(int index) {
  std::ostringstream os;
  os << "subj-";
  os.width(4);
  os.fill('0');
  os << index;
  return os.str();
}

ImageGrid<float> gaussian_blur(const ImageGrid<float>& x, double sigma) {
  if (sigma <= 0.0) return x;
  const TruncatedGaussian k = truncated_gaussian(sigma);
  const int h = x.height();
  const int w = x.width();
  ImageGrid<float> out(x.shape());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int di = -k.radius; di <= k.radius; ++di) {
        const int ii = std::clamp(i + di, 0, h - 1);
        for (int dj = -k.radius; dj <= k.radius; ++dj) {
          const double wk = k.at(di, dj);
          if (wk == 0.0) continue;
          acc += wk * x(ii, std::clamp(j + dj, 0, w - 1));
        }
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

namespace {

struct Ellipse {
  double ci, cj, a, b, angle;

  /// Normalized radius: < 1 inside, 1 on the boundary.
  [[nodiscard]] double rho(double i, double j) const {
    const double di = i - ci;
    const double dj = j - cj;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = c * dj + s * di;
    const double v = -s * dj + c * di;
    return std::sqrt((u * u) / (a * a) + (v * v) / (b * b));
  }
};

struct Blob {
  double ci, cj, radius;
  double harm[2];
  double phase[2];

  [[nodiscard]] bool contains(double i, double j) const {
    const double di = i - ci;
    const double dj = j - cj;
    const double theta = std::atan2(di, dj);
    const double r = radius * (1.0 + 0.18 * (harm[0] * std::cos(2 * theta + phase[0]) +
                                             harm[1] * std::cos(3 * theta + phase[1])));
    return di * di + dj * dj <= r * r;
  }
};

}  // namespace

SubjectRecord generate_subject(const ToyParams& params, RngKey key, std::string id) {
  params.validate();
  const int n = params.resolution;
  const Shape shape{n, n};
  RngStream anatomy_rng(key.fold("anatomy"));
  RngStream lesion_rng(key.fold("lesion"));
  RngStream noise_rng(key.fold("noise"));
  constexpr double pi = std::numbers::pi;

  const double centre = (n - 1) / 2.0;
  Ellipse head{centre + (anatomy_rng.uniform() - 0.5) * 0.06 * n,
               centre + (anatomy_rng.uniform() - 0.5) * 0.06 * n,
               params.head_semi_major.draw(anatomy_rng),
               params.head_semi_minor.draw(anatomy_rng),
               (anatomy_rng.uniform() - 0.5) * 0.4};
  head.b = std::min(head.b, head.a);
  Ellipse brain = head;
  brain.a = std::max(1.0, head.a - params.skull_thickness);
  brain.b = std::max(1.0, head.b - params.skull_thickness);

  const double va = params.ventricle_semi_major.draw(anatomy_rng);
  const double vb = params.ventricle_semi_minor.draw(anatomy_rng);
  const double offset = vb + 1.0 + anatomy_rng.uniform();
  // Ventricles sit either side of the long axis (image columns run along u).
  const double oi = offset * std::cos(head.angle);
  const double oj = -offset * std::sin(head.angle);
  const Ellipse vent_l{head.ci + oi, head.cj + oj, va, vb, head.angle};
  const Ellipse vent_r{head.ci - oi, head.cj - oj, va, vb, head.angle};

  const double skull_v = params.skull_intensity.draw(anatomy_rng);
  const double brain_v = params.brain_intensity.draw(anatomy_rng);
  const double vent_v = params.ventricle_intensity.draw(anatomy_rng);

  ImageGrid<float> anatomy(shape);
  ImageGrid<float> head_ind(shape);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      if (head.rho(i, j) <= 1.0) {
        head_ind(i, j) = 1.0f;
        v = skull_v;
        if (brain.rho(i, j) <= 1.0) {
          v = brain_v;
          if (vent_l.rho(i, j) <= 1.0 || vent_r.rho(i, j) <= 1.0) v = vent_v;
        }
      }
      anatomy(i, j) = static_cast<float>(v);
    }
  }
  anatomy = gaussian_blur(anatomy, params.anatomy_smoothing);
  head_ind = gaussian_blur(head_ind, params.anatomy_smoothing);

  // Low-frequency additive bias, confined to the head.
  const double f1 = 0.5 + anatomy_rng.uniform();
  const double f2 = 0.5 + anatomy_rng.uniform();
  const double p1 = 2 * pi * anatomy_rng.uniform();
  const double p2 = 2 * pi * anatomy_rng.uniform();
  ImageGrid<float> truth_sub(shape);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double bias = 0.5 * params.bias_amplitude *
                          (std::cos(2 * pi * f1 * i / n + p1) + std::cos(2 * pi * f2 * j / n + p2));
      truth_sub(i, j) = static_cast<float>(anatomy(i, j) + bias * head_ind(i, j));
    }
  }

  // Lesion support.
  const auto count = static_cast<int>(lesion_rng.uniform_int(params.min_lesions, params.max_lesions));
  LesionMask mask(shape);
  std::vector<Blob> blobs;
  std::vector<double> amps;
  for (int b = 0; b < count; ++b) {
    Blob blob{};
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      blob.radius = params.lesion_radius.draw(lesion_rng);
      const double rr = lesion_rng.uniform() * std::max(0.0, std::min(brain.a, brain.b) - blob.radius);
      const double th = 2 * pi * lesion_rng.uniform();
      blob.ci = brain.ci + rr * std::sin(th);
      blob.cj = brain.cj + rr * std::cos(th);
      for (int k = 0; k < 2; ++k) {
        blob.harm[k] = 2.0 * lesion_rng.uniform() - 1.0;
        blob.phase[k] = 2 * pi * lesion_rng.uniform();
      }
      placed = true;
      bool any = false;
      for (int i = 0; i < n && placed; ++i) {
        for (int j = 0; j < n; ++j) {
          if (!blob.contains(i, j)) continue;
          any = true;
          if (brain.rho(i, j) > 0.92) {
            placed = false;
            break;
          }
        }
      }
      placed = placed && any;
    }
    if (!placed) {
      std::ostringstream os;
      os << "generate_subject(" << id << "): could not place lesion " << b
         << " inside the brain after 100 attempts (brain semi-axes " << brain.a << ", " << brain.b
         << " px, lesion radius range [" << params.lesion_radius.lo << ", "
         << params.lesion_radius.hi << "] px)";
      throw InvalidArgument(os.str());
    }
    const double sign = lesion_rng.uniform() < params.negative_fraction ? -1.0 : 1.0;
    amps.push_back(sign * params.amplitude.draw(lesion_rng));
    blobs.push_back(blob);
  }

  // Correlated texture, unit variance over the lesion.
  ImageGrid<float> texture(shape);
  if (count > 0 && params.texture_strength > 0.0) {
    RngStream tex_rng(key.fold("texture"));
    tex_rng.fill_normal(texture.values());
    texture = gaussian_blur(texture, params.texture_length);
  }

  DeviationField<float> truth_dev(shape);
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (blobs[b].contains(i, j)) {
          mask.set(i, j, true);
          truth_dev(i, j) = static_cast<float>(amps[b]);
        }
      }
    }
  }
  if (count > 0 && params.texture_strength > 0.0) {
    double sum = 0.0;
    double sq = 0.0;
    const auto inside = static_cast<double>(mask.count());
    for (std::size_t k = 0; k < texture.size(); ++k) {
      if (!mask[k]) continue;
      sum += texture[k];
      sq += static_cast<double>(texture[k]) * texture[k];
    }
    const double mean = sum / inside;
    const double sd = std::sqrt(std::max(1e-12, sq / inside - mean * mean));
    for (std::size_t k = 0; k < texture.size(); ++k) {
      if (!mask[k]) continue;
      const double tex = std::clamp((texture[k] - mean) / sd, -2.0, 2.0);
      truth_dev[k] = static_cast<float>(truth_dev[k] * (1.0 + params.texture_strength * tex));
    }
  }
  // Keep the composed image inside the unit interval.
  for (std::size_t k = 0; k < truth_dev.size(); ++k) {
    if (!mask[k]) continue;
    const float lo = 0.02f - truth_sub[k];
    const float hi = 0.98f - truth_sub[k];
    truth_dev[k] = std::clamp(truth_dev[k], std::min(lo, 0.0f), std::max(hi, 0.0f));
  }

  ImageGrid<float> x(shape);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double noise = params.noise_std > 0.0 ? params.noise_std * noise_rng.normal() : 0.0;
    x[k] = std::clamp(static_cast<float>(truth_sub[k] + truth_dev[k] + noise), 0.0f, 1.0f);
  }

  ImageGrid<float> x_ph = inpaint_reference(x, mask).image;
  return SubjectRecord{std::move(id), std::move(x), std::move(mask), std::move(truth_sub),
                       std::move(truth_dev), std::move(x_ph)};
}

std::vector<SubjectRecord> generate_corpus(const ToyParams& params, int subjects, std::uint64_t seed,
                                           double lesion_free_fraction) {
  if (subjects < 0) throw InvalidArgument("generate_corpus: negative subject count");
  if (lesion_free_fraction < 0.0 || lesion_free_fraction > 1.0) {
    throw InvalidArgument("generate_corpus: lesion-free fraction must lie in [0,1]");
  }
  const RngKey root(seed);
  std::vector<int> order(static_cast<std::size_t>(subjects));
  std::iota(order.begin(), order.end(), 0);
  RngStream pick(root.fold("lesion-free"));
  std::shuffle(order.begin(), order.end(), pick.engine());
  const auto n_free = static_cast<std::size_t>(std::lround(lesion_free_fraction * subjects));
  std::vector<bool> lesion_free(static_cast<std::size_t>(subjects), false);
  for (std::size_t k = 0; k < n_free; ++k) lesion_free[static_cast<std::size_t>(order[k])] = true;

  ToyParams healthy = params;
  healthy.min_lesions = healthy.max_lesions = 0;
  std::vector<SubjectRecord> out;
  out.reserve(static_cast<std::size_t>(subjects));
  for (int i = 0; i < subjects; ++i) {
    const ToyParams& p = lesion_free[static_cast<std::size_t>(i)] ? healthy : params;
    out.push_back(generate_subject(p, root.fold(static_cast<std::uint64_t>(i)), subject_id(i)));
  }
  return out;
}

}  // namespace pathosyn
