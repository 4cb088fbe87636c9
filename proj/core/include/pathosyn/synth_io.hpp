#pragma once

// On-disk layout of synthesis outputs:
//   <dir>/synth_manifest.json
//   <id>.xsub.f32, <id>.blend.f32             shared by all samples of a subject
//   <id>.s<k>.xhat.f32, <id>.s<k>.rhat.f32    one pair per sample
//   *.png                                     8-bit previews
// Writing into a directory that already holds a manifest adds to it, so
// several subjects can be synthesized into one directory.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pathosyn/grid.hpp"

namespace pathosyn {

inline constexpr int kSynthFormatVersion = 1;

struct SynthSample {
  std::string subject;
  int sample = 0;
  ImageGrid<float> x_hat;
  DeviationField<float> r_hat;
  ImageGrid<float> x_sub;
  BlendMap<float> blend;
};

/// provenance is stored verbatim under the manifest's "runs" list.
void write_synth_samples(const std::filesystem::path& dir, std::span<const SynthSample> samples,
                         const nlohmann::json& provenance, bool previews = true);

/// Throws DataError when the directory has no manifest or no samples.
[[nodiscard]] std::vector<SynthSample> read_synth_dir(const std::filesystem::path& dir);

}  // namespace pathosyn
