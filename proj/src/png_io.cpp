#include "spinecurate/png_io.hpp"

#include <cstdio>
#include <memory>

#include <fmt/format.h>
#include <png.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(Errc::io, fmt::format("cannot open {}", path.string()));
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Raster2D read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw Error(Errc::io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);

  Raster2D raster;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::io, fmt::format("{}: {}", path.string(), message));
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  raster.format = channels == 3 ? PixelFormat::rgb8 : PixelFormat::gray8;
  raster.pixels.resize(static_cast<std::size_t>(raster.width) * raster.height * channels);
  rows.resize(static_cast<std::size_t>(raster.height));
  for (int r = 0; r < raster.height; ++r) {
    rows[r] = raster.pixels.data() + static_cast<std::size_t>(r) * raster.width * raster.channels();
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raster;
}

void write_png(const std::filesystem::path& path, const Raster2D& raster) {
  if (!raster.valid() || raster.width == 0 || raster.height == 0) {
    throw Error(Errc::invalid_argument, "cannot write an empty or inconsistent raster");
  }
  auto file = open_file(path, "wb");
  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw Error(Errc::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);

  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  for (int r = 0; r < raster.height; ++r) {
    rows[r] = const_cast<png_bytep>(raster.pixels.data()) +
              static_cast<std::size_t>(r) * raster.width * raster.channels();
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, fmt::format("{}: {}", path.string(), message));
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width),
               static_cast<png_uint_32>(raster.height), 8,
               raster.format == PixelFormat::rgb8 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace spinecurate
