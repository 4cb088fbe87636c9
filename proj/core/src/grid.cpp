#include "pathosyn/grid.hpp"

#include <numeric>

namespace pathosyn {

std::string to_string(Shape s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

LesionMask::LesionMask(Shape shape, bool fill) : shape_(shape), bits_(shape.size(), fill ? 1 : 0) {
  if (shape.height <= 0 || shape.width <= 0) {
    throw InvalidArgument("LesionMask: non-positive shape " + to_string(shape));
  }
}

LesionMask::LesionMask(Shape shape, std::vector<std::uint8_t> bits)
    : shape_(shape), bits_(std::move(bits)) {
  if (shape.height <= 0 || shape.width <= 0) {
    throw InvalidArgument("LesionMask: non-positive shape " + to_string(shape));
  }
  if (bits_.size() != shape.size()) {
    throw ShapeMismatch("LesionMask: " + std::to_string(bits_.size()) + " bits for shape " +
                        to_string(shape));
  }
  for (std::uint8_t b : bits_) {
    if (b > 1) throw InvalidArgument("LesionMask: values must be 0 or 1");
  }
}

std::size_t LesionMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace pathosyn
