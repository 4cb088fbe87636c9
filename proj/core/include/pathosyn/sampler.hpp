#pragma once

// Inference-time deviation sampling: start from masked Gaussian noise and
// run the ancestral or DDIM reverse chain with a conditional noise
// predictor, projecting onto the lesion support after every step.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pathosyn/diffusion.hpp"
#include "pathosyn/rng.hpp"

namespace pathosyn {

enum class SamplerKind { ancestral, ddim };

std::string to_string(SamplerKind k);
SamplerKind parse_sampler_kind(const std::string& s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::ddim;
  int ddim_steps = 50;
  double ddim_eta = 0.0;
  std::uint64_t seed = 0;

  void validate(int total_steps) const;
};

/// Conditioning of one trajectory. key identifies the trajectory's noise
/// stream (typically derived from seed, subject id and sample index).
template <std::floating_point T>
struct SamplingRequest {
  ImageGrid<T> x_sub;
  LesionMask mask;
  RngKey key;
};

/// The conditional noise predictor eps_theta([r_t, x_sub, m], t), evaluated
/// for a batch of trajectories that share the step t. Outputs are full
/// resolution and not projected; the sampler does the projection.
template <std::floating_point T>
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  [[nodiscard]] virtual std::vector<DeviationField<T>> predict(
      std::span<const DeviationField<T>> r_t, std::span<const SamplingRequest<T>> cond,
      int t) const = 0;
};

/// Called after every reverse transition with the step just reached.
template <std::floating_point T>
using StepObserver = std::function<void(int t_reached, std::span<const DeviationField<T>>)>;

/// Trajectory key for (seed, subject, sample).
[[nodiscard]] RngKey trajectory_key(std::uint64_t seed, std::string_view subject_id,
                                    std::uint64_t sample_index);

template <std::floating_point T>
[[nodiscard]] DeviationField<T> draw_noise(Shape shape, RngKey key) {
  DeviationField<T> z(shape);
  RngStream stream(key);
  stream.fill_normal(z.values());
  return z;
}

template <std::floating_point T>
[[nodiscard]] std::vector<DeviationField<T>> sample_deviations(
    const NoisePredictor<T>& predictor, std::span<const SamplingRequest<T>> requests,
    const NoiseSchedule& sched, const SamplerConfig& cfg, const StepObserver<T>& observer = {}) {
  cfg.validate(sched.steps());
  const int steps = sched.steps();
  std::vector<DeviationField<T>> r;
  r.reserve(requests.size());
  for (const auto& req : requests) {
    require_same_shape(req.x_sub.shape(), req.mask.shape(), "sample_deviation");
    if (req.mask.empty()) throw InvalidArgument("sample_deviation: empty mask");
    // Dense noise, then projected onto the support.
    r.push_back(apply_support(draw_noise<T>(req.x_sub.shape(), req.key.fold("init")), req.mask));
  }
  if (observer) observer(steps, r);

  auto noise_for = [&](std::size_t i, int t) {
    return draw_noise<T>(requests[i].x_sub.shape(), requests[i].key.fold(static_cast<std::uint64_t>(t)));
  };

  if (cfg.kind == SamplerKind::ancestral) {
    for (int t = steps; t >= 1; --t) {
      const auto eps_hat = predictor.predict(r, requests, t);
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::optional<DeviationField<T>> z;
        if (t > 1) z = noise_for(i, t);
        r[i] = ancestral_step(r[i], eps_hat[i], t, z, sched, requests[i].mask);
      }
      if (observer) observer(t - 1, r);
    }
  } else {
    const std::vector<int> ts = ddim_timesteps(steps, cfg.ddim_steps);
    for (std::size_t s = 0; s < ts.size(); ++s) {
      const int t = ts[s];
      const int t_prev = s + 1 < ts.size() ? ts[s + 1] : 0;
      const auto eps_hat = predictor.predict(r, requests, t);
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::optional<DeviationField<T>> z;
        if (cfg.ddim_eta > 0.0 && t_prev > 0) z = noise_for(i, t);
        r[i] = ddim_step(r[i], eps_hat[i], t, t_prev, sched, cfg.ddim_eta, z, requests[i].mask);
      }
      if (observer) observer(t_prev, r);
    }
  }
  return r;
}

template <std::floating_point T>
[[nodiscard]] DeviationField<T> sample_deviation(const NoisePredictor<T>& predictor,
                                                 const ImageGrid<T>& x_sub, const LesionMask& m,
                                                 const NoiseSchedule& sched, const SamplerConfig& cfg,
                                                 RngKey key) {
  const SamplingRequest<T> req{x_sub, m, key};
  return std::move(sample_deviations(predictor, std::span(&req, 1), sched, cfg).front());
}

}  // namespace pathosyn
