#pragma once

#include <filesystem>

#include "spinecurate/image.hpp"

namespace spinecurate {

/// Palette, 16-bit and alpha inputs are converted to gray8 or rgb8.
Raster2D read_png(const std::filesystem::path& path);

/// Output bytes depend only on the raster contents.
void write_png(const std::filesystem::path& path, const Raster2D& raster);

}  // namespace spinecurate
