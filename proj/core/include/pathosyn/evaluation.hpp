#pragma once

// The evaluation suite run by `pathosyn evaluate`: discriminability of
// synthesized versus held-out real lesion patches, feature-distance ECDF,
// GLCM texture summaries and substrate/deviation disentanglement.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathosyn/dataset.hpp"
#include "pathosyn/evalkit.hpp"
#include "pathosyn/synth_io.hpp"

namespace pathosyn {

struct EvalOptions {
  int patch_margin = 4;
  int bootstrap_n = 1000;
  std::uint64_t seed = 0;
  int mi_bins = 16;
};

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  std::optional<std::pair<double, double>> ci;
};

struct EvaluationReport {
  std::string encoder;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  std::map<std::string, MetricSummary> metrics;
  Discriminability discriminability;
  std::vector<RocPoint> roc;
  EcdfCurve ecdf;
  DisentanglementReport disentanglement;
};

/// Real side: lesioned subjects of the test split. Throws DataError on
/// split leakage (a synthesized subject from the train split) or unknown
/// subjects.
[[nodiscard]] EvaluationReport evaluate_synthesis(const Dataset& dataset, std::span<const SynthSample> synth,
                                                  const FeatureEncoder& encoder, const EvalOptions& options);

[[nodiscard]] nlohmann::json to_json(const EvaluationReport& report);
[[nodiscard]] std::string ecdf_csv(const EcdfCurve& curve);
[[nodiscard]] std::string roc_csv(std::span<const RocPoint> roc);

}  // namespace pathosyn
