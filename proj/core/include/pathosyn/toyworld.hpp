#pragma once

// Procedural phantom subjects with a known anatomy / deviation split:
// nested ellipses with a smooth bias field for the anatomy, randomly
// shaped blobs for the lesion support, and a correlated-noise texture for
// the planted deviation.

#include <cstdint>
#include <string>
#include <vector>

#include "pathosyn/grid.hpp"
#include "pathosyn/rng.hpp"

namespace pathosyn {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double draw(RngStream& rng) const { return lo + (hi - lo) * rng.uniform(); }
  void validate(const char* name) const;
};

struct ToyParams {
  int resolution = 64;

  // Anatomy (pixel units are for the 64 px default; see for_resolution()).
  Interval head_semi_major{24.0, 28.0};
  Interval head_semi_minor{19.0, 23.0};
  double skull_thickness = 2.5;
  Interval ventricle_semi_major{5.0, 7.5};
  Interval ventricle_semi_minor{2.0, 3.0};
  Interval skull_intensity{0.75, 0.85};
  Interval brain_intensity{0.45, 0.55};
  Interval ventricle_intensity{0.15, 0.25};
  double bias_amplitude = 0.04;
  double anatomy_smoothing = 0.7;

  // Lesions.
  int min_lesions = 1;
  int max_lesions = 2;
  Interval lesion_radius{4.0, 8.0};
  /// Deviation magnitude; the sign is negative with probability negative_fraction.
  Interval amplitude{0.15, 0.3};
  double negative_fraction = 0.3;
  double texture_strength = 0.3;
  double texture_length = 1.5;

  double noise_std = 0.01;

  /// Defaults with every pixel-unit length scaled from the 64 px layout.
  [[nodiscard]] static ToyParams for_resolution(int resolution);
  void validate() const;
};

struct SubjectRecord {
  std::string id;
  ImageGrid<float> x;
  LesionMask mask;
  ImageGrid<float> truth_sub;
  DeviationField<float> truth_dev;
  /// Counterfactual healthy reference, cached at generation time.
  ImageGrid<float> x_ph;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// Deterministic in (params, key). Throws InvalidArgument when a lesion
/// cannot be placed inside the brain after 100 attempts.
[[nodiscard]] SubjectRecord generate_subject(const ToyParams& params, RngKey key, std::string id);

/// Subject i of a corpus is generated from RngKey(seed).fold(i); with
/// lesion_free_fraction > 0 a seeded subset carries no lesion.
[[nodiscard]] std::vector<SubjectRecord> generate_corpus(const ToyParams& params, int subjects,
                                                         std::uint64_t seed,
                                                         double lesion_free_fraction = 0.0);

[[nodiscard]] std::string subject_id(int index);

/// Separable-equivalent isotropic blur with the truncated Gaussian used
/// for blend maps (edge replicated).
[[nodiscard]] ImageGrid<float> gaussian_blur(const ImageGrid<float>& x, double sigma);

}  // namespace pathosyn
