#pragma once

#include <filesystem>

#include "pathosyn/grid.hpp"

namespace pathosyn {

/// 8-bit grayscale PNG preview: values clamped to [lo, hi] and scaled to
/// [0, 255]. Display only; the raw float arrays stay authoritative.
void write_png_preview(const std::filesystem::path& path, const ImageGrid<float>& x, float lo = 0.0f,
                       float hi = 1.0f);

}  // namespace pathosyn
