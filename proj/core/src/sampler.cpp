#include "pathosyn/sampler.hpp"

namespace pathosyn {

std::string to_string(SamplerKind k) { return k == SamplerKind::ancestral ? "ancestral" : "ddim"; }

SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "ancestral") return SamplerKind::ancestral;
  if (s == "ddim") return SamplerKind::ddim;
  throw ConfigError("unknown sampler '" + s + "' (expected ancestral|ddim)");
}

void SamplerConfig::validate(int total_steps) const {
  if (kind == SamplerKind::ddim && (ddim_steps < 1 || ddim_steps > total_steps)) {
    throw InvalidArgument("SamplerConfig: ddim_steps must lie in [1, T]");
  }
  if (!(ddim_eta >= 0.0 && ddim_eta <= 1.0)) {
    throw InvalidArgument("SamplerConfig: ddim_eta must lie in [0,1]");
  }
}

RngKey trajectory_key(std::uint64_t seed, std::string_view subject_id, std::uint64_t sample_index) {
  return RngKey(seed).fold(subject_id).fold(sample_index);
}

}  // namespace pathosyn
