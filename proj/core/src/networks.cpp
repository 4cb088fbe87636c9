#include "pathosyn/networks.hpp"

#include <cmath>
#include <numbers>

#include "pathosyn/errors.hpp"
#include "pathosyn/tensor_bridge.hpp"

namespace pathosyn {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

std::string to_string(NormKind k) { return k == NormKind::group ? "group" : "none"; }

NormKind parse_norm_kind(const std::string& s) {
  if (s == "group") return NormKind::group;
  if (s == "none") return NormKind::none;
  throw ConfigError("unknown normalization '" + s + "' (expected group or none)");
}

void SubstrateNetConfig::validate() const {
  if (base_width <= 0) throw ConfigError("substrate net: base_width must be positive");
  if (depth != 4) throw ConfigError("substrate net: depth is fixed at 4");
  if (resolution <= 0 || resolution % (1 << depth) != 0) {
    throw ConfigError("substrate net: resolution " + std::to_string(resolution) + " not divisible by 2^" +
                      std::to_string(depth));
  }
}

void NoisePredictorConfig::validate() const {
  if (base_width <= 0) throw ConfigError("noise predictor: base_width must be positive");
  if (time_embed_dim <= 0 || time_embed_dim % 2 != 0) {
    throw ConfigError("noise predictor: time_embed_dim must be a positive even integer");
  }
  if (attention_resolution <= 0 || resolution < attention_resolution) {
    throw ConfigError("noise predictor: attention_resolution must be in [1, resolution]");
  }
  int side = resolution;
  while (side > attention_resolution && side % 2 == 0) side /= 2;
  if (side != attention_resolution) {
    throw ConfigError("noise predictor: resolution " + std::to_string(resolution) +
                      " does not halve down to attention side " + std::to_string(attention_resolution));
  }
}

int NoisePredictorConfig::levels() const {
  int n = 1;
  for (int side = resolution; side > attention_resolution; side /= 2) ++n;
  return n;
}

std::vector<double> time_embedding(double t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("time_embedding: dim must be a positive even integer");
  if (t < 0) throw InvalidArgument("time_embedding: t must be nonnegative");
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / dim);
    out[static_cast<std::size_t>(k)] = std::sin(t * w);
    out[static_cast<std::size_t>(half + k)] = std::cos(t * w);
  }
  return out;
}

torch::Tensor time_embedding(const torch::Tensor& t, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw InvalidArgument("time_embedding: dim must be a positive even integer");
  const int half = dim / 2;
  std::vector<double> w(static_cast<std::size_t>(half));
  for (int k = 0; k < half; ++k) w[static_cast<std::size_t>(k)] = std::pow(10000.0, -2.0 * k / dim);
  const auto freqs = torch::tensor(w, torch::kFloat64);
  const auto arg = t.to(torch::kFloat64).reshape({-1, 1}) * freqs.reshape({1, -1});
  return torch::cat({torch::sin(arg), torch::cos(arg)}, 1);
}

namespace {

int group_count(int channels) {
  int best = 1;
  for (int g = 1; g <= 8 && g <= channels / 2; ++g) {
    if (channels % g == 0) best = g;
  }
  return best;
}

nn::Conv2d conv3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

nn::Conv2d conv1(int in, int out, bool bias = true) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 1).bias(bias));
}

torch::Tensor upsample2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

void check_input(const torch::Tensor& x, int resolution, const char* what) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != resolution || x.size(3) != resolution) {
    throw ShapeMismatch(std::string(what) + ": expected (N, 1, " + std::to_string(resolution) + ", " +
                        std::to_string(resolution) + ") input, got " + c10::str(x.sizes()));
  }
}

}  // namespace

NormImpl::NormImpl(int channels, NormKind kind) {
  if (kind == NormKind::group) {
    gn_ = register_module("gn", nn::GroupNorm(nn::GroupNormOptions(group_count(channels), channels)));
  }
}

torch::Tensor NormImpl::forward(const torch::Tensor& x) { return gn_ ? gn_(x) : x; }

SubstrateNetImpl::SubstrateNetImpl(SubstrateNetConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c0 = cfg_.base_width;
  in_conv_ = register_module("in_conv", conv3(SubstrateNetConfig::in_channels, c0));
  int prev = c0;
  for (int l = 0; l < cfg_.depth; ++l) {
    const int c = c0 << l;
    down_.push_back(make_block("down" + std::to_string(l), prev, c));
    prev = c;
  }
  mid_ = make_block("mid", prev, c0 << cfg_.depth);
  up_conv_.assign(static_cast<std::size_t>(cfg_.depth), torch::nn::Conv2d{nullptr});
  up_.resize(static_cast<std::size_t>(cfg_.depth));
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    const int c = c0 << l;
    up_conv_[static_cast<std::size_t>(l)] = register_module("up" + std::to_string(l) + "_conv", conv3(c * 2, c));
    up_[static_cast<std::size_t>(l)] = make_block("up" + std::to_string(l), c * 2, c);
  }
  head_ = register_module("head", conv1(c0, 1));
}

SubstrateNetImpl::Block SubstrateNetImpl::make_block(const std::string& name, int in, int out) {
  Block b;
  b.conv1 = register_module(name + "_conv1", conv3(in, out));
  b.norm1 = register_module(name + "_norm1", Norm(out, cfg_.norm));
  b.conv2 = register_module(name + "_conv2", conv3(out, out));
  b.norm2 = register_module(name + "_norm2", Norm(out, cfg_.norm));
  return b;
}

torch::Tensor SubstrateNetImpl::run(Block& b, const torch::Tensor& x) {
  auto h = torch::silu(b.norm1(b.conv1(x)));
  return torch::silu(b.norm2(b.conv2(h)));
}

torch::Tensor SubstrateNetImpl::forward(const torch::Tensor& x_masked, const torch::Tensor& mbar) {
  check_input(x_masked, cfg_.resolution, "substrate net");
  check_input(mbar, cfg_.resolution, "substrate net");
  auto h = in_conv_(torch::cat({x_masked, mbar}, 1));
  std::vector<torch::Tensor> skips;
  for (auto& block : down_) {
    h = run(block, h);
    skips.push_back(h);
    h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
  }
  h = run(mid_, h);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    h = up_conv_[i](upsample2(h));
    h = run(up_[i], torch::cat({h, skips[i]}, 1));
  }
  return head_(h);
}

ResBlockImpl::ResBlockImpl(int in, int out, int temb, NormKind norm) {
  norm1_ = register_module("norm1", Norm(in, norm));
  conv1_ = register_module("conv1", conv3(in, out));
  temb_proj_ = register_module("temb_proj", nn::Linear(temb, out));
  norm2_ = register_module("norm2", Norm(out, norm));
  conv_out_ = register_module("conv_out", conv3(out, out));
  if (in != out) skip_ = register_module("skip", conv1(in, out));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& temb) {
  auto h = conv1_(torch::silu(norm1_(x)));
  h = h + temb_proj_(torch::silu(temb)).unsqueeze(-1).unsqueeze(-1);
  h = conv_out_(torch::silu(norm2_(h)));
  return (skip_ ? skip_(x) : x) + h;
}

AttentionImpl::AttentionImpl(int channels, NormKind norm) {
  norm_ = register_module("norm", Norm(channels, norm));
  qkv_ = register_module("qkv", conv1(channels, 3 * channels, false));
  proj_out_ = register_module("proj_out", conv1(channels, channels));
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0);
  const auto c = x.size(1);
  const auto h = x.size(2);
  const auto w = x.size(3);
  last_side_ = h;
  const auto parts = qkv_(norm_(x)).reshape({b, 3, c, h * w}).unbind(1);
  const auto& q = parts[0];
  const auto& k = parts[1];
  const auto& v = parts[2];
  // (B, HW, HW) affinities, rows indexed by query position.
  auto att = torch::bmm(q.transpose(1, 2), k) * (1.0 / std::sqrt(static_cast<double>(c)));
  att = torch::softmax(att, -1);
  const auto out = torch::bmm(v, att.transpose(1, 2)).reshape({b, c, h, w});
  return x + proj_out_(out);
}

EpsNetImpl::EpsNetImpl(NoisePredictorConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c0 = cfg_.base_width;
  const int d = cfg_.time_embed_dim;
  const int levels = cfg_.levels();
  auto channels = [&](int l) { return l == 0 ? c0 : 2 * c0; };

  temb1_ = register_module("temb1", nn::Linear(d, d));
  temb2_ = register_module("temb2", nn::Linear(d, d));
  in_conv_ = register_module("in_conv", conv3(NoisePredictorConfig::in_channels, c0));
  int prev = c0;
  for (int l = 0; l < levels; ++l) {
    const auto name = std::to_string(l);
    down_.push_back(register_module("down" + name, ResBlock(prev, channels(l), d, cfg_.norm)));
    prev = channels(l);
    if (l == levels - 1) {
      if (cfg_.attention) down_attn_.push_back(register_module("down_attn" + name, Attention(prev, cfg_.norm)));
    } else {
      downsample_.push_back(register_module("downsample" + name, conv3(prev, prev, 2)));
    }
  }
  mid1_ = register_module("mid1", ResBlock(prev, prev, d, cfg_.norm));
  if (cfg_.attention) mid_attn_ = register_module("mid_attn", Attention(prev, cfg_.norm));
  mid2_ = register_module("mid2", ResBlock(prev, prev, d, cfg_.norm));
  up_.assign(static_cast<std::size_t>(levels), ResBlock{nullptr});
  upsample_.assign(static_cast<std::size_t>(levels - 1), torch::nn::Conv2d{nullptr});
  for (int l = levels - 1; l >= 0; --l) {
    const auto name = std::to_string(l);
    up_[static_cast<std::size_t>(l)] =
        register_module("up" + name, ResBlock(prev + channels(l), channels(l), d, cfg_.norm));
    prev = channels(l);
    if (l == levels - 1 && cfg_.attention) up_attn_.push_back(register_module("up_attn" + name, Attention(prev, cfg_.norm)));
    if (l > 0) {
      upsample_[static_cast<std::size_t>(l - 1)] =
          register_module("upsample" + name, conv3(prev, channels(l - 1)));
      prev = channels(l - 1);
    }
  }
  out_norm_ = register_module("out_norm", Norm(c0, cfg_.norm));
  out_conv_ = register_module("out_conv", conv3(c0, 1));
}

torch::Tensor EpsNetImpl::forward(const torch::Tensor& r_t, const torch::Tensor& x_sub, const torch::Tensor& m,
                                  const torch::Tensor& t) {
  check_input(r_t, cfg_.resolution, "noise predictor");
  check_input(x_sub, cfg_.resolution, "noise predictor");
  check_input(m, cfg_.resolution, "noise predictor");
  if (t.numel() != r_t.size(0)) throw ShapeMismatch("noise predictor: one timestep per batch element required");
  const int levels = cfg_.levels();
  auto temb = time_embedding(t, cfg_.time_embed_dim).to(r_t.dtype());
  temb = temb2_(torch::silu(temb1_(temb)));

  auto h = in_conv_(torch::cat({r_t, x_sub, m}, 1));
  std::vector<torch::Tensor> skips;
  for (int l = 0; l < levels; ++l) {
    h = down_[static_cast<std::size_t>(l)](h, temb);
    if (l == levels - 1 && cfg_.attention) h = down_attn_.front()(h);
    skips.push_back(h);
    if (l < levels - 1) h = downsample_[static_cast<std::size_t>(l)](h);
  }
  h = mid1_(h, temb);
  if (cfg_.attention) h = mid_attn_(h);
  h = mid2_(h, temb);
  for (int l = levels - 1; l >= 0; --l) {
    h = up_[static_cast<std::size_t>(l)](torch::cat({h, skips[static_cast<std::size_t>(l)]}, 1), temb);
    if (l == levels - 1 && cfg_.attention) h = up_attn_.front()(h);
    if (l > 0) h = upsample_[static_cast<std::size_t>(l - 1)](upsample2(h));
  }
  return out_conv_(torch::silu(out_norm_(h)));
}

std::vector<std::int64_t> EpsNetImpl::attention_sides() const {
  std::vector<std::int64_t> out;
  for (const auto& a : down_attn_) out.push_back(a->last_side());
  if (mid_attn_) out.push_back(mid_attn_->last_side());
  for (const auto& a : up_attn_) out.push_back(a->last_side());
  return out;
}

void initialize_parameters(torch::nn::Module& net, RngKey key, double branch_scale) {
  torch::NoGradGuard no_grad;
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto& item : net.named_parameters(true)) {
    const std::string& name = item.key();
    torch::Tensor& p = item.value();
    if (ends_with(name, "bias")) {
      p.zero_();
      continue;
    }
    if (p.dim() == 1) {
      p.fill_(1.0);
      continue;
    }
    const double fan_in = static_cast<double>(p.numel() / p.size(0));
    double bound = std::sqrt(3.0 / fan_in);
    if (ends_with(name, "conv_out.weight") || ends_with(name, "proj_out.weight") ||
        ends_with(name, "out_conv.weight")) {
      bound *= branch_scale;
    }
    RngStream rng(key.fold(name));
    std::vector<double> values(static_cast<std::size_t>(p.numel()));
    for (double& v : values) v = bound * (2.0 * rng.uniform() - 1.0);
    p.copy_(torch::from_blob(values.data(), p.sizes(), torch::kFloat64).to(p.dtype()));
  }
}

template <std::floating_point T>
ImageGrid<T> estimate_substrate(SubstrateNet& net, const ImageGrid<T>& x, const LesionMask& m) {
  require_same_shape(x.shape(), m.shape(), "estimate_substrate");
  const int res = net->config().resolution;
  if (x.height() != res || x.width() != res) {
    throw ShapeMismatch("estimate_substrate: grid " + to_string(x.shape()) + " but network resolution " +
                        std::to_string(res));
  }
  torch::NoGradGuard no_grad;
  const auto dtype = net->parameters().front().scalar_type();
  const auto mbar = 1.0 - to_tensor(m, dtype);
  const auto out = net->forward(to_tensor(x, dtype) * mbar, mbar);
  return to_grid<T>(out);
}

template <std::floating_point T>
DeviationField<T> predict_noise(EpsNet& net, const DeviationField<T>& r_t, const ImageGrid<T>& x_sub,
                                const LesionMask& m, int t) {
  require_same_shape(r_t.shape(), x_sub.shape(), "predict_noise");
  require_same_shape(r_t.shape(), m.shape(), "predict_noise");
  torch::NoGradGuard no_grad;
  const auto dtype = net->parameters().front().scalar_type();
  const auto out = net->forward(to_tensor(r_t, dtype), to_tensor(x_sub, dtype), to_tensor(m, dtype),
                                torch::full({1}, t, torch::kInt64));
  return to_grid<T, tags::Deviation>(out);
}

template <std::floating_point T>
std::vector<DeviationField<T>> TorchNoisePredictor<T>::predict(std::span<const DeviationField<T>> r_t,
                                                               std::span<const SamplingRequest<T>> cond,
                                                               int t) const {
  if (r_t.size() != cond.size()) throw InvalidArgument("noise predictor: batch size mismatch");
  torch::NoGradGuard no_grad;
  const auto dtype = net_->parameters().front().scalar_type();
  std::vector<DeviationField<T>> out;
  out.reserve(r_t.size());
  const auto chunk = static_cast<std::size_t>(std::max(1, max_batch_));
  for (std::size_t begin = 0; begin < r_t.size(); begin += chunk) {
    const std::size_t end = std::min(r_t.size(), begin + chunk);
    std::vector<torch::Tensor> rs, xs, ms;
    for (std::size_t i = begin; i < end; ++i) {
      rs.push_back(to_tensor(r_t[i], dtype));
      xs.push_back(to_tensor(cond[i].x_sub, dtype));
      ms.push_back(to_tensor(cond[i].mask, dtype));
    }
    const auto n = static_cast<std::int64_t>(end - begin);
    const auto eps = net_->forward(torch::cat(rs, 0), torch::cat(xs, 0), torch::cat(ms, 0),
                                   torch::full({n}, t, torch::kInt64));
    for (std::int64_t i = 0; i < n; ++i) out.push_back(to_grid<T, tags::Deviation>(eps[i]));
  }
  return out;
}

template ImageGrid<float> estimate_substrate(SubstrateNet&, const ImageGrid<float>&, const LesionMask&);
template ImageGrid<double> estimate_substrate(SubstrateNet&, const ImageGrid<double>&, const LesionMask&);
template DeviationField<float> predict_noise(EpsNet&, const DeviationField<float>&, const ImageGrid<float>&,
                                             const LesionMask&, int);
template DeviationField<double> predict_noise(EpsNet&, const DeviationField<double>&, const ImageGrid<double>&,
                                              const LesionMask&, int);
template class TorchNoisePredictor<float>;
template class TorchNoisePredictor<double>;

}  // namespace pathosyn
