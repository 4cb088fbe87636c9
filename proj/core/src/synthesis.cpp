#include "pathosyn/synthesis.hpp"

#include <torch/script.h>

#include "pathosyn/errors.hpp"
#include "pathosyn/lattice.hpp"
#include "pathosyn/networks.hpp"
#include "pathosyn/tensor_bridge.hpp"

namespace pathosyn {

std::vector<SynthSample> synthesize_batch(TrainingState& state, std::span<const SubjectRecord* const> subjects,
                                          const SamplerConfig& cfg, int samples,
                                          const StepObserver<float>& observer) {
  if (samples <= 0) throw InvalidArgument("synthesize: samples must be positive");
  std::vector<SamplingRequest<float>> requests;
  std::vector<BlendMap<float>> blends;
  for (const SubjectRecord* r : subjects) {
    if (r->mask.empty()) throw InvalidArgument("synthesize: subject " + r->id + " has an empty mask");
    auto x_sub = estimate_substrate(state.f_sub, r->x, r->mask);
    blends.push_back(smooth_mask<float>(r->mask, state.config.blend_sigma));
    for (int k = 0; k < samples; ++k) {
      requests.push_back({x_sub, r->mask, trajectory_key(cfg.seed, r->id, static_cast<std::uint64_t>(k))});
    }
  }
  const TorchNoisePredictor<float> predictor(state.eps);
  const auto r_hat = sample_deviations<float>(predictor, requests, state.schedule, cfg, observer);

  std::vector<SynthSample> out;
  out.reserve(r_hat.size());
  for (std::size_t i = 0; i < r_hat.size(); ++i) {
    const std::size_t subject = i / static_cast<std::size_t>(samples);
    SynthSample s;
    s.subject = subjects[subject]->id;
    s.sample = static_cast<int>(i % static_cast<std::size_t>(samples));
    s.x_sub = requests[i].x_sub;
    s.blend = blends[subject];
    s.r_hat = r_hat[i];
    s.x_hat = recompose(s.x_sub, s.r_hat, s.blend);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SynthSample> synthesize(TrainingState& state, const SubjectRecord& subject, const SamplerConfig& cfg,
                                    int samples, const StepObserver<float>& observer) {
  const SubjectRecord* one = &subject;
  return synthesize_batch(state, std::span(&one, 1), cfg, samples, observer);
}

struct ExternalEncoder::Impl {
  mutable torch::jit::Module module;
};

ExternalEncoder::ExternalEncoder(const std::string& path, int probe_side) : impl_(std::make_unique<Impl>()), path_(path) {
  try {
    impl_->module = torch::jit::load(path);
  } catch (const c10::Error& e) {
    throw DataError("external encoder: cannot load " + path + ": " + e.what_without_backtrace());
  }
  impl_->module.eval();
  dimension_ = encode(ImageGrid<float>(Shape{probe_side, probe_side})).size();
}

ExternalEncoder::~ExternalEncoder() = default;

FeatureVector ExternalEncoder::encode(const ImageGrid<float>& x) const {
  torch::NoGradGuard no_grad;
  torch::Tensor out;
  try {
    out = impl_->module.forward({to_tensor(x, torch::kFloat32)}).toTensor();
  } catch (const c10::Error& e) {
    throw DataError("external encoder " + path_ + " failed: " + e.what_without_backtrace());
  }
  const auto flat = out.detach().to(torch::kFloat64).contiguous().reshape({-1});
  FeatureVector f(flat.data_ptr<double>(), flat.data_ptr<double>() + flat.numel());
  if (dimension_ != 0 && f.size() != dimension_) {
    throw DataError("external encoder " + path_ + " returned " + std::to_string(f.size()) + " features, expected " +
                    std::to_string(dimension_));
  }
  return f;
}

std::unique_ptr<FeatureEncoder> make_encoder(const std::string& spec) {
  if (spec == "builtin") return std::make_unique<StatisticsEncoder>();
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
    return std::make_unique<ExternalEncoder>(spec.substr(prefix.size()));
  }
  throw ConfigError("unknown encoder '" + spec + "' (expected builtin or external:PATH)");
}

}  // namespace pathosyn
