#pragma once

// Conversions between lattice grids and NCHW torch tensors.

#include <torch/torch.h>

#include <concepts>
#include <span>
#include <vector>

#include "pathosyn/errors.hpp"
#include "pathosyn/grid.hpp"

namespace pathosyn {

template <std::floating_point T>
[[nodiscard]] constexpr torch::Dtype torch_dtype() {
  if constexpr (std::same_as<T, float>) {
    return torch::kFloat32;
  } else {
    return torch::kFloat64;
  }
}

/// (1, 1, H, W) tensor holding a copy of the grid.
template <std::floating_point T, class Tag>
[[nodiscard]] torch::Tensor to_tensor(const Grid<T, Tag>& g, torch::Dtype dtype = torch_dtype<T>()) {
  auto t = torch::empty({1, 1, g.height(), g.width()}, torch::TensorOptions().dtype(torch_dtype<T>()));
  std::copy(g.values().begin(), g.values().end(), t.template data_ptr<T>());
  return t.to(dtype);
}

[[nodiscard]] torch::Tensor to_tensor(const LesionMask& m, torch::Dtype dtype);

/// Copies a tensor with H*W elements (any leading singleton dims) into a grid.
template <std::floating_point T, class Tag = tags::Image>
[[nodiscard]] Grid<T, Tag> to_grid(const torch::Tensor& t) {
  if (t.dim() < 2) throw ShapeMismatch("to_grid: tensor needs at least two dims");
  const auto h = static_cast<int>(t.size(-2));
  const auto w = static_cast<int>(t.size(-1));
  if (t.numel() != static_cast<std::int64_t>(h) * w) throw ShapeMismatch("to_grid: tensor is not a single plane");
  const auto c = t.detach().to(torch::kCPU, torch_dtype<T>()).contiguous();
  Grid<T, Tag> g(Shape{h, w});
  std::copy_n(c.template data_ptr<T>(), g.size(), g.values().begin());
  return g;
}

/// Stacks single-plane grids into an (N, 1, H, W) tensor.
template <std::floating_point T, class Tag>
[[nodiscard]] torch::Tensor stack_grids(std::span<const Grid<T, Tag>> grids, torch::Dtype dtype) {
  std::vector<torch::Tensor> parts;
  parts.reserve(grids.size());
  for (const auto& g : grids) parts.push_back(to_tensor(g, dtype));
  return torch::cat(parts, 0);
}

}  // namespace pathosyn
