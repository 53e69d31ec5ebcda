#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace spinecurate {

/// 0 background, 1 vertebrae, 2 spinal canal, 3 intervertebral disc.
using ClassId = std::uint8_t;
inline constexpr int kNumClasses = 4;

enum class PixelFormat { gray8, rgb8 };

/// Row-major 8-bit raster, one or three interleaved channels.
struct Raster2D {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::gray8;
  std::vector<std::uint8_t> pixels;

  int channels() const { return format == PixelFormat::rgb8 ? 3 : 1; }
  bool valid() const {
    return width >= 0 && height >= 0 &&
           pixels.size() == static_cast<std::size_t>(width) * height * channels();
  }
  bool operator==(const Raster2D&) const = default;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kRed{255, 0, 0};
inline constexpr Rgb kGreen{0, 255, 0};
inline constexpr Rgb kBlue{0, 0, 255};

struct RgbMask {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  RgbMask() = default;
  RgbMask(int w, int h, Rgb fill = kBlack)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Rgb& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  const Rgb& at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  bool operator==(const RgbMask&) const = default;
};

struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<ClassId> labels;

  LabelMask() = default;
  LabelMask(int w, int h, ClassId fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  ClassId& at(int row, int col) { return labels[static_cast<std::size_t>(row) * width + col]; }
  ClassId at(int row, int col) const {
    return labels[static_cast<std::size_t>(row) * width + col];
  }
  std::size_t size() const { return labels.size(); }
  bool same_shape(const LabelMask& o) const { return width == o.width && height == o.height; }
  bool operator==(const LabelMask&) const = default;
};

enum class Connectivity { four, eight };

struct Neighborhood {
  Connectivity connectivity = Connectivity::eight;
};

/// Offsets (drow, dcol) in a fixed scan order: up, left, right, down, then the
/// diagonals for eight-connectivity.
inline constexpr std::array<std::array<int, 2>, 8> kNeighborOffsets{{
    {-1, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};

inline constexpr int neighbor_count(Connectivity c) { return c == Connectivity::four ? 4 : 8; }

}  // namespace spinecurate
