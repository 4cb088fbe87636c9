#pragma once

// JSON run configuration. Missing keys keep their defaults; unknown keys
// are rejected with their full path.
//
// {
//   "train":   { epochs, batch_size, learning_rate, weight_decay, grad_clip, seed,
//                precision, per_batch_t, blend_sigma, saturation_delta,
//                checkpoint_every, validate_every, validation_subjects,
//                validation_ddim_steps,
//                loss_weights: { lambda_diff, lambda_dev, lambda_syn,
//                                lambda_pat, lambda_ring, lambda_leak },
//                substrate_weights: { lambda_out, lambda_in },
//                schedule: { steps, beta_start, beta_end, sigma },
//                substrate_net: { base_width, depth, norm },
//                noise_net: { base_width, time_embed_dim, attention_resolution,
//                             attention, norm } },
//   "sampler": { kind, ddim_steps, ddim_eta, seed },
//   "toy":     { ToyParams fields; intervals as [lo, hi] }
// }

#include <filesystem>

#include <nlohmann/json.hpp>

#include "pathosyn/sampler.hpp"
#include "pathosyn/toyworld.hpp"
#include "pathosyn/trainer.hpp"

namespace pathosyn {

struct RunConfig {
  TrainConfig train;
  SamplerConfig sampler;
  ToyParams toy;
};

[[nodiscard]] nlohmann::json to_json(const TrainConfig& c);
[[nodiscard]] nlohmann::json to_json(const SamplerConfig& c);
[[nodiscard]] nlohmann::json to_json(const ToyParams& p);
[[nodiscard]] nlohmann::json to_json(const RunConfig& c);

[[nodiscard]] TrainConfig train_config_from_json(const nlohmann::json& j);
[[nodiscard]] SamplerConfig sampler_config_from_json(const nlohmann::json& j);
[[nodiscard]] ToyParams toy_params_from_json(const nlohmann::json& j);
[[nodiscard]] RunConfig run_config_from_json(const nlohmann::json& j);

/// Parses and validates a config file; ConfigError names the offending key.
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pathosyn
