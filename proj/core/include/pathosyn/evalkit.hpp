#pragma once

// Evaluation instruments: disentanglement (cosine coupling, mutual
// information), real-vs-synthetic discriminability, GLCM texture
// statistics and nearest-neighbour feature-distance ECDFs.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathosyn/grid.hpp"
#include "pathosyn/rng.hpp"

namespace pathosyn {

using FeatureVector = std::vector<double>;
using FeatureSet = std::vector<FeatureVector>;

/// |<a,b>| / (|a| |b|). Throws on zero vectors or length mismatch.
[[nodiscard]] double cosine_coupling(std::span<const double> a, std::span<const double> b);

struct MutualInformation {
  double nats = 0.0;
  /// Set when either input was constant and the estimate defaulted to 0.
  bool degenerate = false;
};

/// Equal-frequency bin index per sample (ties share the bin of their
/// lowest rank).
[[nodiscard]] std::vector<int> equal_frequency_bins(std::span<const double> v, int bins);

/// Plug-in estimate over a bins x bins joint histogram built from
/// equal-frequency marginal bins.
[[nodiscard]] MutualInformation mutual_information(std::span<const double> a, std::span<const double> b,
                                                   int bins = 16);

/// Projection of each row onto the first principal axis of the set.
[[nodiscard]] std::vector<double> principal_projection(const FeatureSet& features);

/// MI between two paired feature sets after 1-D principal projection.
[[nodiscard]] MutualInformation mutual_information(const FeatureSet& a, const FeatureSet& b,
                                                   int bins = 16);

/// P(pos > neg) + 0.5 P(pos == neg), computed from ranks.
[[nodiscard]] double roc_auc(std::span<const double> positive, std::span<const double> negative);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};
[[nodiscard]] std::vector<RocPoint> roc_curve(std::span<const double> positive,
                                              std::span<const double> negative);

struct DiscriminabilityOptions {
  int folds = 5;
  int bootstrap_n = 1000;
  double l2 = 1.0;
  double confidence = 0.95;
};

struct Discriminability {
  double auc = 0.5;
  double ci_low = 0.0;
  double ci_high = 1.0;
  /// Out-of-fold classifier scores (higher = "real").
  std::vector<double> real_scores;
  std::vector<double> synth_scores;
  std::vector<double> bootstrap_aucs;
};

/// Real-vs-synthetic AUC from an L2-regularised logistic classifier on
/// standardised features, scored out-of-fold, with a stratified percentile
/// bootstrap CI. Optional group labels keep samples of one group (e.g. one
/// subject) inside the same fold. Lower AUC means more realistic.
[[nodiscard]] Discriminability discriminability_auc(
    const FeatureSet& real, const FeatureSet& synth, RngKey key, DiscriminabilityOptions opts = {},
    const std::vector<std::string>* real_groups = nullptr,
    const std::vector<std::string>* synth_groups = nullptr);

struct GlcmOffset {
  int di = 0;
  int dj = 1;
};

struct GlcmStats {
  double contrast = 0.0;
  double homogeneity = 0.0;
};

/// Symmetric, normalised co-occurrence matrix (levels x levels, row-major)
/// of x quantised to `levels` uniform bins on [0,1].
[[nodiscard]] std::vector<double> glcm_matrix(const ImageGrid<float>& x, int levels, GlcmOffset offset);
[[nodiscard]] GlcmStats glcm_stats(const ImageGrid<float>& x, int levels, GlcmOffset offset);

struct EcdfCurve {
  std::vector<double> values;
  std::vector<double> fractions;
};

/// ECDF of each synthetic vector's Euclidean distance to its nearest real vector.
[[nodiscard]] EcdfCurve feature_distance_ecdf(const FeatureSet& real, const FeatureSet& synth);

/// phi(.): deterministic map from a field to a fixed-length feature vector.
class FeatureEncoder {
 public:
  virtual ~FeatureEncoder() = default;
  [[nodiscard]] virtual FeatureVector encode(const ImageGrid<float>& x) const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Mean, sd, skewness, kurtosis, then GLCM contrast and homogeneity at
/// offsets (0,1), (1,0), (1,1), (1,-1). Values are mapped from
/// [value_lo, value_hi] onto [0,1] before quantisation.
class StatisticsEncoder final : public FeatureEncoder {
 public:
  explicit StatisticsEncoder(int levels = 32, double value_lo = 0.0, double value_hi = 1.0);
  [[nodiscard]] FeatureVector encode(const ImageGrid<float>& x) const override;
  [[nodiscard]] std::size_t dimension() const override { return 12; }
  [[nodiscard]] std::string name() const override { return "builtin"; }

 private:
  int levels_;
  double lo_;
  double hi_;
};

/// Bounding box of m grown by margin pixels (whole grid when m is empty).
[[nodiscard]] ImageGrid<float> lesion_patch(const ImageGrid<float>& x, const LesionMask& m, int margin);

/// Z-scores every set with the mean / sd of `reference` (sd floor 1e-12).
void standardize_features(const FeatureSet& reference, std::vector<FeatureSet*> sets);

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};
[[nodiscard]] SummaryStat summarize(std::span<const double> v);

struct DisentanglementInput {
  ImageGrid<float> x_sub;
  ImageGrid<float> deviation;
};

struct DisentanglementReport {
  SummaryStat coupling;
  std::size_t skipped = 0;
  SummaryStat mutual_information;
  int mi_bins = 0;
};

/// Per-subject C = cosine_coupling(phi(x_sub), phi(r)); corpus MI between
/// the paired feature sets (mean and sd over bootstrap resamples). Subjects
/// whose features are zero vectors are skipped.
[[nodiscard]] DisentanglementReport disentanglement_report(const FeatureEncoder& encoder,
                                                           std::span<const DisentanglementInput> items,
                                                           int bins, RngKey key,
                                                           int bootstrap_n = 200);

}  // namespace pathosyn
