#pragma once

// Substrate estimator f_sub (plain U-Net, four pooling stages) and the
// conditional noise predictor eps_theta (wide-residual U-Net with a
// sinusoidal time embedding and self-attention at a fixed feature side).

#include <torch/torch.h>

#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathosyn/grid.hpp"
#include "pathosyn/rng.hpp"
#include "pathosyn/sampler.hpp"

namespace pathosyn {

enum class NormKind { group, none };

std::string to_string(NormKind k);
NormKind parse_norm_kind(const std::string& s);

struct SubstrateNetConfig {
  static constexpr int in_channels = 2;
  int base_width = 32;
  int depth = 4;
  int resolution = 64;
  NormKind norm = NormKind::group;
  void validate() const;
};

struct NoisePredictorConfig {
  static constexpr int in_channels = 3;
  int base_width = 64;
  int time_embed_dim = 128;
  int attention_resolution = 16;
  int resolution = 64;
  bool attention = true;
  NormKind norm = NormKind::group;
  void validate() const;
  /// Number of feature resolutions, the last of which is attention_resolution.
  [[nodiscard]] int levels() const;
};

/// [sin(t w_0) .. sin(t w_{d/2-1}), cos(t w_0) .. cos(t w_{d/2-1})],
/// w_k = 10000^(-2k/dim).
[[nodiscard]] std::vector<double> time_embedding(double t, int dim);
/// Row-wise embedding of a 1-D tensor of timesteps.
[[nodiscard]] torch::Tensor time_embedding(const torch::Tensor& t, int dim);

/// GroupNorm over gcd-style groups, or identity.
class NormImpl : public torch::nn::Module {
 public:
  NormImpl(int channels, NormKind kind);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::GroupNorm gn_{nullptr};
};
TORCH_MODULE(Norm);

class SubstrateNetImpl : public torch::nn::Module {
 public:
  explicit SubstrateNetImpl(SubstrateNetConfig cfg);
  /// x_masked = x ⊙ m̄ and mbar, both (N, 1, H, W).
  torch::Tensor forward(const torch::Tensor& x_masked, const torch::Tensor& mbar);
  [[nodiscard]] const SubstrateNetConfig& config() const noexcept { return cfg_; }

 private:
  struct Block {
    torch::nn::Conv2d conv1{nullptr};
    Norm norm1{nullptr};
    torch::nn::Conv2d conv2{nullptr};
    Norm norm2{nullptr};
  };
  Block make_block(const std::string& name, int in, int out);
  static torch::Tensor run(Block& b, const torch::Tensor& x);

  SubstrateNetConfig cfg_;
  torch::nn::Conv2d in_conv_{nullptr};
  std::vector<Block> down_;
  Block mid_;
  std::vector<torch::nn::Conv2d> up_conv_;
  std::vector<Block> up_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(SubstrateNet);

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in, int out, int temb, NormKind norm);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

 private:
  Norm norm1_{nullptr};
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Linear temb_proj_{nullptr};
  Norm norm2_{nullptr};
  torch::nn::Conv2d conv_out_{nullptr};
  torch::nn::Conv2d skip_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Single-head self-attention over the spatial positions of each sample.
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int channels, NormKind norm);
  torch::Tensor forward(const torch::Tensor& x);
  /// Spatial side of the most recent input (0 before the first call).
  [[nodiscard]] std::int64_t last_side() const noexcept { return last_side_; }

 private:
  Norm norm_{nullptr};
  torch::nn::Conv2d qkv_{nullptr};
  torch::nn::Conv2d proj_out_{nullptr};
  std::int64_t last_side_ = 0;
};
TORCH_MODULE(Attention);

class EpsNetImpl : public torch::nn::Module {
 public:
  explicit EpsNetImpl(NoisePredictorConfig cfg);
  /// r_t, x_sub, m: (N, 1, H, W); t: (N) timesteps.
  torch::Tensor forward(const torch::Tensor& r_t, const torch::Tensor& x_sub, const torch::Tensor& m,
                        const torch::Tensor& t);
  [[nodiscard]] const NoisePredictorConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::vector<std::int64_t> attention_sides() const;

 private:
  NoisePredictorConfig cfg_;
  torch::nn::Linear temb1_{nullptr};
  torch::nn::Linear temb2_{nullptr};
  torch::nn::Conv2d in_conv_{nullptr};
  std::vector<ResBlock> down_;
  std::vector<Attention> down_attn_;
  std::vector<torch::nn::Conv2d> downsample_;
  ResBlock mid1_{nullptr};
  Attention mid_attn_{nullptr};
  ResBlock mid2_{nullptr};
  std::vector<ResBlock> up_;
  std::vector<Attention> up_attn_;
  std::vector<torch::nn::Conv2d> upsample_;
  Norm out_norm_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(EpsNet);

/// Deterministic fan-in scaled initialisation drawn from the library RNG:
/// conv / linear weights ~ U(-b, b) with b = sqrt(3 / fan_in), biases 0,
/// norm scales 1. The last layer of every residual branch (and the output
/// head of eps_theta) is scaled by branch_scale.
void initialize_parameters(torch::nn::Module& net, RngKey key, double branch_scale = 0.1);

/// f_sub(x ⊙ m̄, m̄) for one subject.
template <std::floating_point T>
[[nodiscard]] ImageGrid<T> estimate_substrate(SubstrateNet& net, const ImageGrid<T>& x, const LesionMask& m);

/// eps_theta([r_t, x_sub, m], t) for one subject, not projected onto m.
template <std::floating_point T>
[[nodiscard]] DeviationField<T> predict_noise(EpsNet& net, const DeviationField<T>& r_t,
                                              const ImageGrid<T>& x_sub, const LesionMask& m, int t);

/// Adapts a trained EpsNet to the sampler interface; each call evaluates
/// the whole batch of trajectories in chunks of max_batch.
template <std::floating_point T>
class TorchNoisePredictor final : public NoisePredictor<T> {
 public:
  explicit TorchNoisePredictor(EpsNet net, int max_batch = 32) : net_(std::move(net)), max_batch_(max_batch) {}
  [[nodiscard]] std::vector<DeviationField<T>> predict(std::span<const DeviationField<T>> r_t,
                                                       std::span<const SamplingRequest<T>> cond,
                                                       int t) const override;

 private:
  mutable EpsNet net_;
  int max_batch_;
};

}  // namespace pathosyn
