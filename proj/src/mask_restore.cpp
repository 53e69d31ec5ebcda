#include "spinecurate/mask_restore.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

ClassId ColorClassMap::class_of(Rgb c) const {
  if (c == kBlack) return 0;
  if (c == kRed) return 1;
  if (c == kGreen) return green_is_ivd ? 3 : 2;
  if (c == kBlue) return green_is_ivd ? 2 : 3;
  throw Error(Errc::not_canonical, fmt::format("colour ({},{},{})", c.r, c.g, c.b));
}

Rgb ColorClassMap::color_of(ClassId c) const {
  switch (c) {
    case 0: return kBlack;
    case 1: return kRed;
    case 2: return green_is_ivd ? kBlue : kGreen;
    case 3: return green_is_ivd ? kGreen : kBlue;
  }
  throw Error(Errc::invalid_argument, fmt::format("class {}", int(c)));
}

void PaletteRules::validate() const {
  const std::array<IntensityRange, 3> ranges{dark, mid, light};
  for (const auto& r : ranges) {
    if (r.lo < 1 || r.hi > 255 || r.lo > r.hi) {
      throw Error(Errc::invalid_argument,
                  fmt::format("intensity range [{}, {}] must lie within [1, 255]", r.lo, r.hi));
    }
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      if (ranges[i].lo <= ranges[j].hi && ranges[j].lo <= ranges[i].hi) {
        throw Error(Errc::invalid_argument, "intensity ranges overlap");
      }
    }
  }
}

bool is_canonical(Rgb c) noexcept {
  return c == kBlack || c == kRed || c == kGreen || c == kBlue;
}

namespace {

// Canonical colours as small codes; the class order used for tie-breaks is
// looked up through ColorClassMap.
enum Code : std::uint8_t { kCodeBlack = 0, kCodeRed = 1, kCodeGreen = 2, kCodeBlue = 3 };
constexpr std::array<Rgb, 4> kCodeColor{kBlack, kRed, kGreen, kBlue};

struct CodeGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> codes;

  std::uint8_t at(int r, int c) const { return codes[static_cast<std::size_t>(r) * width + c]; }
};

std::uint8_t code_of(Rgb c) {
  if (c == kBlack) return kCodeBlack;
  if (c == kRed) return kCodeRed;
  if (c == kGreen) return kCodeGreen;
  if (c == kBlue) return kCodeBlue;
  throw Error(Errc::not_canonical, fmt::format("colour ({},{},{})", c.r, c.g, c.b));
}

CodeGrid to_codes(const RgbMask& mask) {
  CodeGrid g{mask.width, mask.height, std::vector<std::uint8_t>(mask.pixels.size())};
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) g.codes[i] = code_of(mask.pixels[i]);
  return g;
}

RgbMask to_mask(const CodeGrid& g) {
  RgbMask m(g.width, g.height);
  for (std::size_t i = 0; i < g.codes.size(); ++i) m.pixels[i] = kCodeColor[g.codes[i]];
  return m;
}

using Ranks = std::array<int, 4>;

Ranks ranks_for(ColorClassMap map) {
  Ranks r{};
  for (int code = 0; code < 4; ++code) r[code] = map.class_of(kCodeColor[code]);
  return r;
}

using Counts = std::array<int, 4>;

int gather(const CodeGrid& g, int r, int c, int n_offsets, Counts& counts) {
  counts = {};
  int total = 0;
  for (int k = 0; k < n_offsets; ++k) {
    const int rr = r + kNeighborOffsets[k][0];
    const int cc = c + kNeighborOffsets[k][1];
    if (rr < 0 || rr >= g.height || cc < 0 || cc >= g.width) continue;
    ++counts[g.at(rr, cc)];
    ++total;
  }
  return total;
}

// Most common neighbouring code. The pixel keeps its own code whenever that
// code is among the most common; otherwise ties go to the lowest class.
std::uint8_t vote(const Counts& counts, std::uint8_t own, const Ranks& ranks) {
  const int best = *std::max_element(counts.begin(), counts.end());
  if (counts[own] == best) return own;
  std::uint8_t pick = 0;
  int pick_rank = 99;
  for (std::uint8_t code = 0; code < 4; ++code) {
    if (counts[code] == best && ranks[code] < pick_rank) {
      pick = code;
      pick_rank = ranks[code];
    }
  }
  return pick;
}

// Each kernel reads `in` and writes `out` (same shape); returns true if any
// pixel changed.

bool kernel_propagate(const CodeGrid& in, CodeGrid& out, Neighborhood nb) {
  const int n = neighbor_count(nb.connectivity);
  bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      const auto own = in.at(r, c);
      auto result = own;
      for (int k = 0; k < n; ++k) {
        const int rr = r + kNeighborOffsets[k][0];
        const int cc = c + kNeighborOffsets[k][1];
        if (rr < 0 || rr >= in.height || cc < 0 || cc >= in.width) continue;
        if (in.at(rr, cc) == own) {
          result = in.at(rr, cc);
          break;
        }
      }
      out.codes[static_cast<std::size_t>(r) * in.width + c] = result;
      changed = changed || result != own;
    }
  }
  return changed;
}

bool kernel_outlines(const CodeGrid& in, CodeGrid& out, Neighborhood nb, const Ranks& ranks) {
  const int n = neighbor_count(nb.connectivity);
  bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
  for (int r = 0; r < in.height; ++r) {
    Counts counts;
    for (int c = 0; c < in.width; ++c) {
      const auto own = in.at(r, c);
      auto result = own;
      if (gather(in, r, c, n, counts) > 0) result = vote(counts, own, ranks);
      out.codes[static_cast<std::size_t>(r) * in.width + c] = result;
      changed = changed || result != own;
    }
  }
  return changed;
}

bool kernel_borders(const CodeGrid& in, CodeGrid& out, Neighborhood nb, const Ranks& ranks) {
  const int n = neighbor_count(nb.connectivity);
  bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
  for (int r = 0; r < in.height; ++r) {
    Counts counts;
    for (int c = 0; c < in.width; ++c) {
      const auto own = in.at(r, c);
      auto result = own;
      const bool has_left = c > 0;
      const bool has_right = c + 1 < in.width;
      const bool left_differs = !has_left || in.at(r, c - 1) != own;
      const bool right_differs = !has_right || in.at(r, c + 1) != own;
      if ((has_left || has_right) && left_differs && right_differs) {
        gather(in, r, c, n, counts);
        result = vote(counts, own, ranks);
      }
      out.codes[static_cast<std::size_t>(r) * in.width + c] = result;
      changed = changed || result != own;
    }
  }
  return changed;
}

bool kernel_singletons(const CodeGrid& in, CodeGrid& out, Neighborhood nb, const Ranks& ranks) {
  const int n = neighbor_count(nb.connectivity);
  bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
  for (int r = 0; r < in.height; ++r) {
    Counts counts;
    for (int c = 0; c < in.width; ++c) {
      const auto own = in.at(r, c);
      auto result = own;
      if (gather(in, r, c, n, counts) > 0 && counts[own] == 0) result = vote(counts, own, ranks);
      out.codes[static_cast<std::size_t>(r) * in.width + c] = result;
      changed = changed || result != own;
    }
  }
  return changed;
}

bool kernel_red(const CodeGrid& in, CodeGrid& out) {
  bool has_red = false;
  bool has_green_blue = false;
  for (auto code : in.codes) {
    has_red = has_red || code == kCodeRed;
    has_green_blue = has_green_blue || code == kCodeGreen || code == kCodeBlue;
  }
  out.codes = in.codes;
  if (has_red || !has_green_blue) return false;
  for (auto& code : out.codes) {
    if (code == kCodeGreen || code == kCodeBlue) code = kCodeRed;
  }
  return true;
}

template <typename Kernel>
RgbMask run_kernel(const RgbMask& mask, Kernel&& kernel) {
  const CodeGrid in = to_codes(mask);
  CodeGrid out = in;
  kernel(in, out);
  return to_mask(out);
}

}  // namespace

RgbMask replace_color_ranges(const RgbMask& mask, const PaletteRules& rules) {
  rules.validate();
  RgbMask out = mask;
  std::size_t bad = mask.pixels.size();
#pragma omp parallel for schedule(static) reduction(min : bad)
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    const Rgb p = mask.pixels[i];
    if (is_canonical(p)) continue;
    const int level = std::max({p.r, p.g, p.b});
    if (rules.dark.contains(level)) {
      out.pixels[i] = kRed;
    } else if (rules.mid.contains(level)) {
      out.pixels[i] = kGreen;
    } else if (rules.light.contains(level)) {
      out.pixels[i] = kBlue;
    } else {
      bad = std::min(bad, i);
    }
  }
  if (bad < mask.pixels.size()) {
    const Rgb p = mask.pixels[bad];
    throw Error(Errc::uncovered_intensity,
                fmt::format("pixel {} ({},{},{}) falls in no intensity range", bad, p.r, p.g, p.b));
  }
  return out;
}

RgbMask propagate_neighbor_colors(const RgbMask& mask, Neighborhood nb) {
  return run_kernel(mask, [&](const CodeGrid& in, CodeGrid& out) { kernel_propagate(in, out, nb); });
}

RgbMask remove_outlines(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  const auto ranks = ranks_for(map);
  return run_kernel(mask,
                    [&](const CodeGrid& in, CodeGrid& out) { kernel_outlines(in, out, nb, ranks); });
}

RgbMask fix_disagreeing_borders(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  const auto ranks = ranks_for(map);
  return run_kernel(mask,
                    [&](const CodeGrid& in, CodeGrid& out) { kernel_borders(in, out, nb, ranks); });
}

RgbMask replace_singletons(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  const auto ranks = ranks_for(map);
  return run_kernel(
      mask, [&](const CodeGrid& in, CodeGrid& out) { kernel_singletons(in, out, nb, ranks); });
}

RgbMask ensure_red_presence(const RgbMask& mask) {
  return run_kernel(mask, [](const CodeGrid& in, CodeGrid& out) { kernel_red(in, out); });
}

AptaResult apta(const RgbMask& mask, const PaletteRules& rules, Neighborhood nb, int max_rounds) {
  if (max_rounds < 1) throw Error(Errc::invalid_argument, "max_rounds must be >= 1");
  if (mask.width <= 0 || mask.height <= 0) {
    throw Error(Errc::invalid_argument, "mask dimensions must be positive");
  }
  const auto ranks = ranks_for(rules.classes);
  CodeGrid cur = to_codes(replace_color_ranges(mask, rules));
  CodeGrid next = cur;

  AptaResult result;
  for (int round = 1; round <= max_rounds; ++round) {
    result.rounds = round;
    bool changed = false;
    changed |= kernel_propagate(cur, next, nb);
    std::swap(cur, next);
    changed |= kernel_outlines(cur, next, nb, ranks);
    std::swap(cur, next);
    changed |= kernel_borders(cur, next, nb, ranks);
    std::swap(cur, next);
    changed |= kernel_singletons(cur, next, nb, ranks);
    std::swap(cur, next);
    changed |= kernel_red(cur, next);
    std::swap(cur, next);
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  result.labels = to_labels(to_mask(cur), rules.classes);
  return result;
}

LabelMask to_labels(const RgbMask& mask, ColorClassMap map) {
  LabelMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) out.labels[i] = map.class_of(mask.pixels[i]);
  return out;
}

RgbMask to_rgb(const LabelMask& mask, ColorClassMap map) {
  RgbMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) out.pixels[i] = map.color_of(mask.labels[i]);
  return out;
}

RgbMask rgb_from_raster(const Raster2D& raster) {
  if (!raster.valid()) throw Error(Errc::invalid_argument, "inconsistent raster");
  RgbMask out(raster.width, raster.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (raster.format == PixelFormat::gray8) {
      const auto v = raster.pixels[i];
      out.pixels[i] = Rgb{v, v, v};
    } else {
      out.pixels[i] = Rgb{raster.pixels[3 * i], raster.pixels[3 * i + 1], raster.pixels[3 * i + 2]};
    }
  }
  return out;
}

bool has_singleton(const LabelMask& mask, Neighborhood nb) {
  const int n = neighbor_count(nb.connectivity);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      int neighbors = 0;
      int same = 0;
      for (int k = 0; k < n; ++k) {
        const int rr = r + kNeighborOffsets[k][0];
        const int cc = c + kNeighborOffsets[k][1];
        if (rr < 0 || rr >= mask.height || cc < 0 || cc >= mask.width) continue;
        ++neighbors;
        same += mask.at(rr, cc) == mask.at(r, c);
      }
      if (neighbors > 0 && same == 0) return true;
    }
  }
  return false;
}

}  // namespace spinecurate
