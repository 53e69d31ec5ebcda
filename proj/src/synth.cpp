#include "spinecurate/synth.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate::synth {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

void fill_rect(LabelMask& m, int r0, int c0, int r1, int c1, ClassId v) {
  for (int r = std::max(r0, 0); r < std::min(r1, m.height); ++r) {
    for (int c = std::max(c0, 0); c < std::min(c1, m.width); ++c) m.at(r, c) = v;
  }
}

// Palette shades per class. 15 non-black shades plus black gives 16 colours.
constexpr std::array<std::uint8_t, 5> kDarkShades{18, 33, 47, 61, 76};
constexpr std::array<std::uint8_t, 4> kMidShades{96, 118, 139, 158};
constexpr std::array<std::uint8_t, 4> kLightShades{182, 204, 226, 247};
constexpr std::uint8_t kOutlineShade = 214;
constexpr std::uint8_t kSpeckleShade = 128;

}  // namespace

LabelMask spine_labels(int width, int height, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  LabelMask m(width, height, 0);
  scale = std::clamp(scale, 0.05, 1.0);
  const int cx = width / 2 + uniform_int(rng, -width / 16, width / 16);
  const int body_w = std::max(4, static_cast<int>(width * 0.5 * scale));
  const int canal_w = std::max(3, static_cast<int>(width * 0.2 * scale));
  const int top = static_cast<int>(height * (0.5 - 0.48 * scale));
  const int bottom = static_cast<int>(height * (0.5 + 0.48 * scale));

  // Canal band to the right of the bodies.
  const int canal_c0 = cx + body_w / 2 + 1;
  fill_rect(m, top, canal_c0, bottom, canal_c0 + canal_w, 2);

  // Alternating vertebra / disc stack.
  const int levels = 4;
  const int span = bottom - top;
  const int disc_h = std::max(3, span / (levels * 5));
  const int body_h = std::max(4, (span - (levels - 1) * disc_h) / levels);
  int r = top;
  for (int k = 0; k < levels && r < bottom; ++k) {
    const int jitter = uniform_int(rng, -1, 1);
    fill_rect(m, r, cx - body_w / 2 + jitter, r + body_h, cx + body_w / 2 + jitter, 1);
    r += body_h;
    if (k + 1 < levels) {
      fill_rect(m, r, cx - body_w / 2 + 1, r + disc_h, cx + body_w / 2 - 1, 3);
      r += disc_h;
    }
  }
  return m;
}

RgbMask render_defective(const LabelMask& labels, std::uint64_t seed, Defect defect) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  RgbMask out(labels.width, labels.height, kBlack);
  auto gray = [](std::uint8_t v) { return Rgb{v, v, v}; };
  // Shade varies with the row band so every class shows several colours.
  for (int r = 0; r < labels.height; ++r) {
    const int band = r * 5 / std::max(1, labels.height);
    for (int c = 0; c < labels.width; ++c) {
      switch (labels.at(r, c)) {
        case 1:
          if (defect != Defect::missing_red) out.at(r, c) = gray(kDarkShades[band % kDarkShades.size()]);
          break;
        case 2: out.at(r, c) = gray(kMidShades[band % kMidShades.size()]); break;
        case 3: out.at(r, c) = gray(kLightShades[band % kLightShades.size()]); break;
        default: break;
      }
    }
  }
  // One-pixel outline just outside every vertebra body.
  if (defect != Defect::missing_red) {
    for (int r = 0; r < labels.height; ++r) {
      for (int c = 0; c < labels.width; ++c) {
        if (labels.at(r, c) != 0) continue;
        bool touches = false;
        for (int k = 0; k < 4; ++k) {
          const int rr = r + kNeighborOffsets[k][0];
          const int cc = c + kNeighborOffsets[k][1];
          touches = touches || (rr >= 0 && rr < labels.height && cc >= 0 && cc < labels.width &&
                                labels.at(rr, cc) == 1);
        }
        if (touches) out.at(r, c) = gray(kOutlineShade);
      }
    }
  }
  // Isolated speckle.
  const int speckles = std::max(1, labels.width * labels.height / 400);
  for (int k = 0; k < speckles; ++k) {
    const int r = uniform_int(rng, 0, labels.height - 1);
    const int c = uniform_int(rng, 0, labels.width - 1);
    out.at(r, c) = gray(kSpeckleShade);
  }
  return out;
}

Raster2D render_defective_gray(const LabelMask& labels, std::uint64_t seed, Defect defect) {
  const auto rgb = render_defective(labels, seed, defect);
  Raster2D out{labels.width, labels.height, PixelFormat::gray8,
               std::vector<std::uint8_t>(rgb.pixels.size())};
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) out.pixels[i] = rgb.pixels[i].r;
  return out;
}

VolumePair volume_pair(int width, int height, int depth, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(width) * height * depth;
  std::vector<std::int16_t> image(n);
  std::vector<std::uint8_t> mask(n);
  std::mt19937_64 noise(seed + 17);
  constexpr std::array<int, kNumClasses> kIntensity{40, 900, 400, 650};
  for (int z = 0; z < depth; ++z) {
    LabelMask labels(width, height, 0);
    if (z == 1) {
      labels = spine_labels(width, height, seed * 131 + z, 0.9);
      for (auto& l : labels.labels) l = l == 3 ? 1 : l;
    } else if (z > 1) {
      const double scale = 0.35 + 0.65 * static_cast<double>((z * 7 + seed) % 5) / 4.0;
      labels = spine_labels(width, height, seed * 131 + z, scale);
    }
    const auto shades = render_defective_gray(labels, seed * 977 + z, Defect::shaded);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const auto slice_i = static_cast<std::size_t>(y) * width + x;
        const auto vol_i = static_cast<std::size_t>(x) + static_cast<std::size_t>(width) *
                                                             (y + static_cast<std::size_t>(height) * z);
        image[vol_i] = static_cast<std::int16_t>(kIntensity[labels.labels[slice_i]] +
                                                 static_cast<int>(noise() % 41) - 20);
        mask[vol_i] = shades.pixels[slice_i];
      }
    }
  }
  VolumePair pair;
  pair.image = make_volume({width, height, depth}, std::move(image), {0.6875, 0.6875, 3.3});
  pair.mask = make_volume({width, height, depth}, std::move(mask), {0.6875, 0.6875, 3.3});
  return pair;
}

LabelMask perturb_labels(const LabelMask& labels, std::uint64_t seed, double fraction) {
  std::mt19937_64 rng(seed);
  LabelMask out = labels;
  const auto cutoff = static_cast<std::uint64_t>(std::clamp(fraction, 0.0, 1.0) * 1e6);
  for (auto& v : out.labels) {
    if (rng() % 1000000 < cutoff) v = static_cast<ClassId>(rng() % kNumClasses);
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, int volumes, int width, int height, int depth,
                   std::uint64_t seed) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  constexpr std::array<const char*, 3> kSuffix{"t1", "t2", "t2_SPACE"};
  for (int v = 0; v < volumes; ++v) {
    const auto stem = fmt::format("{}_{}", v / 3 + 1, kSuffix[v % 3]);
    const auto pair = volume_pair(width, height, depth, seed + static_cast<std::uint64_t>(v) * 1000);
    write_volume_file(dir / "images" / (stem + ".mha"), pair.image);
    write_volume_file(dir / "masks" / (stem + ".mha"), pair.mask);
  }
}

}  // namespace spinecurate::synth
