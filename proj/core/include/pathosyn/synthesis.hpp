#pragma once

// Synthesis: substrate from f_sub, deviation samples from the reverse chain,
// seam-aware recomposition.

#include <memory>
#include <string>
#include <vector>

#include "pathosyn/evalkit.hpp"
#include "pathosyn/sampler.hpp"
#include "pathosyn/synth_io.hpp"
#include "pathosyn/trainer.hpp"

namespace pathosyn {

/// K samples for one subject; sample k uses trajectory_key(cfg.seed, id, k).
/// Throws InvalidArgument("... empty mask") for lesion-free subjects.
[[nodiscard]] std::vector<SynthSample> synthesize(TrainingState& state, const SubjectRecord& subject,
                                                  const SamplerConfig& cfg, int samples,
                                                  const StepObserver<float>& observer = {});

/// Same, for several subjects in one batched reverse chain.
[[nodiscard]] std::vector<SynthSample> synthesize_batch(TrainingState& state,
                                                        std::span<const SubjectRecord* const> subjects,
                                                        const SamplerConfig& cfg, int samples,
                                                        const StepObserver<float>& observer = {});

/// Frozen TorchScript encoder: a module mapping a (1, 1, H, W) float tensor
/// to any tensor, flattened into the feature vector.
class ExternalEncoder final : public FeatureEncoder {
 public:
  explicit ExternalEncoder(const std::string& path, int probe_side = 64);
  ~ExternalEncoder() override;
  [[nodiscard]] FeatureVector encode(const ImageGrid<float>& x) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::string name() const override { return "external:" + path_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string path_;
  std::size_t dimension_ = 0;
};

/// "builtin" or "external:PATH".
[[nodiscard]] std::unique_ptr<FeatureEncoder> make_encoder(const std::string& spec);

}  // namespace pathosyn
