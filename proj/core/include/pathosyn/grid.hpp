#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathosyn/errors.hpp"

namespace pathosyn {

/// Height/width of a 2-D lattice. Row-major storage everywhere.
struct Shape {
  int height = 0;
  int width = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(Shape s);

inline void require_same_shape(Shape a, Shape b, const char* what) {
  if (a != b) {
    throw ShapeMismatch(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                        to_string(b));
  }
}

namespace tags {
struct Image {};
struct Blend {};
struct Deviation {};
}  // namespace tags

/// A real-valued field on the lattice. The tag parameter keeps images,
/// blend maps and deviation fields from being mixed up silently; use
/// retag() to convert deliberately.
template <std::floating_point T, class Tag>
class Grid {
 public:
  using value_type = T;
  using tag_type = Tag;

  Grid() = default;
  explicit Grid(Shape shape, T fill = T(0)) : shape_(check(shape)), values_(shape.size(), fill) {}
  Grid(Shape shape, std::vector<T> values) : shape_(check(shape)), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw ShapeMismatch("Grid: " + std::to_string(values_.size()) + " values for shape " +
                          to_string(shape_));
    }
  }

  [[nodiscard]] Shape shape() const noexcept { return shape_; }
  [[nodiscard]] int height() const noexcept { return shape_.height; }
  [[nodiscard]] int width() const noexcept { return shape_.width; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  T& operator()(int i, int j) { return values_[index(i, j)]; }
  const T& operator()(int i, int j) const { return values_[index(i, j)]; }
  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }

  [[nodiscard]] std::span<T> values() noexcept { return values_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<T>& storage() const noexcept { return values_; }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static Shape check(Shape s) {
    if (s.height <= 0 || s.width <= 0) {
      throw InvalidArgument("Grid: non-positive shape " + to_string(s));
    }
    return s;
  }
  [[nodiscard]] std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
           static_cast<std::size_t>(j);
  }

  Shape shape_{};
  std::vector<T> values_;
};

template <std::floating_point T = float>
using ImageGrid = Grid<T, tags::Image>;
template <std::floating_point T = float>
using BlendMap = Grid<T, tags::Blend>;
/// Residual r (and its diffusion states r_t, estimates r̂₀). Supported on a
/// lesion mask; the support and saturation bound are checked by the
/// operations that produce it rather than stored alongside it.
template <std::floating_point T = float>
using DeviationField = Grid<T, tags::Deviation>;

template <class ToTag, std::floating_point T, class FromTag>
[[nodiscard]] Grid<T, ToTag> retag(Grid<T, FromTag> g) {
  const Shape s = g.shape();
  return Grid<T, ToTag>(s, std::vector<T>(g.values().begin(), g.values().end()));
}

template <std::floating_point To, std::floating_point From, class Tag>
[[nodiscard]] Grid<To, Tag> cast(const Grid<From, Tag>& g) {
  std::vector<To> out(g.size());
  std::transform(g.values().begin(), g.values().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return Grid<To, Tag>(g.shape(), std::move(out));
}

/// Binary lesion support m (1 = lesional).
class LesionMask {
 public:
  LesionMask() = default;
  explicit LesionMask(Shape shape, bool fill = false);
  LesionMask(Shape shape, std::vector<std::uint8_t> bits);

  [[nodiscard]] Shape shape() const noexcept { return shape_; }
  [[nodiscard]] int height() const noexcept { return shape_.height; }
  [[nodiscard]] int width() const noexcept { return shape_.width; }
  [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }

  [[nodiscard]] bool operator()(int i, int j) const {
    return bits_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
                 static_cast<std::size_t>(j)] != 0;
  }
  [[nodiscard]] bool operator[](std::size_t k) const { return bits_[k] != 0; }
  void set(int i, int j, bool v) {
    bits_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_.width) +
          static_cast<std::size_t>(j)] = v ? 1 : 0;
  }

  [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  [[nodiscard]] std::size_t count() const noexcept;
  [[nodiscard]] bool empty() const noexcept { return count() == 0; }
  [[nodiscard]] bool full() const noexcept { return count() == size(); }

  template <std::floating_point T>
  [[nodiscard]] ImageGrid<T> as_grid() const {
    ImageGrid<T> g(shape_);
    for (std::size_t k = 0; k < bits_.size(); ++k) g[k] = bits_[k] ? T(1) : T(0);
    return g;
  }

  friend bool operator==(const LesionMask&, const LesionMask&) = default;

 private:
  Shape shape_{};
  std::vector<std::uint8_t> bits_;
};

}  // namespace pathosyn
