#include "pathosyn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace pathosyn {

void write_png_preview(const std::filesystem::path& path, const ImageGrid<float>& x, float lo, float hi) {
  if (!(hi > lo)) throw InvalidArgument("write_png_preview: empty display range");
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw DataError("write_png_preview: cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png_preview: libpng initialisation failed");
  }
  std::vector<png_byte> rows(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const float v = std::clamp((x[k] - lo) / (hi - lo), 0.0f, 1.0f);
    rows[k] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(x.height()));
  for (int i = 0; i < x.height(); ++i) {
    row_ptrs[static_cast<std::size_t>(i)] = rows.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(x.width());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png_preview: libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(x.width()), static_cast<png_uint_32>(x.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace pathosyn
