#pragma once

// Adaptive pixel transformation for defective colour label masks.
//
// A defective mask carries many shades instead of four class colours and may
// lack the vertebrae colour entirely. Restoration runs six local rules:
//
//   1. map intensity ranges (max RGB channel) to red / green / blue
//   2. adopt the colour of the first matching adjacent pixel
//   3. replace outline pixels by the most common neighbouring colour
//   4. same, for pixels whose left and right neighbours both differ
//   5. replace singletons by the most common neighbouring colour
//   6. if green or blue exist but red does not, turn them red
//
// Every rule reads an immutable snapshot of its input, so results do not
// depend on scan order, and rows are processed in parallel.

#include <cstdint>
#include <optional>

#include "spinecurate/image.hpp"

namespace spinecurate {

struct IntensityRange {
  int lo = 0;
  int hi = 0;
  bool contains(int v) const { return v >= lo && v <= hi; }
  bool operator==(const IntensityRange&) const = default;
};

/// Maps canonical colours to classes. Red is always vertebrae.
struct ColorClassMap {
  bool green_is_ivd = false;

  ClassId class_of(Rgb c) const;  // throws Error{not_canonical}
  Rgb color_of(ClassId c) const;
};

struct PaletteRules {
  IntensityRange dark{1, 84};     // -> red
  IntensityRange mid{85, 169};    // -> green
  IntensityRange light{170, 255}; // -> blue
  ColorClassMap classes;

  /// Ranges must lie in [1, 255] and be pairwise disjoint.
  void validate() const;
};

bool is_canonical(Rgb c) noexcept;

// Individual rules. Rules 2-6 require canonical input and throw
// Error{not_canonical} otherwise.
RgbMask replace_color_ranges(const RgbMask& mask, const PaletteRules& rules);
RgbMask propagate_neighbor_colors(const RgbMask& mask, Neighborhood nb);
RgbMask remove_outlines(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
RgbMask fix_disagreeing_borders(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
RgbMask replace_singletons(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
RgbMask ensure_red_presence(const RgbMask& mask);

struct AptaResult {
  LabelMask labels;
  bool converged = false;
  /// Rounds of rules 2-6 executed, including the final no-change round.
  int rounds = 0;
};

inline constexpr int kDefaultMaxRounds = 16;

/// Rule 1 once, then rounds of rules 2-6 until a round leaves every pixel
/// unchanged or max_rounds is reached. On non-convergence the last iterate is
/// returned with converged == false.
AptaResult apta(const RgbMask& mask, const PaletteRules& rules, Neighborhood nb,
                int max_rounds = kDefaultMaxRounds);

LabelMask to_labels(const RgbMask& mask, ColorClassMap map = {});
RgbMask to_rgb(const LabelMask& mask, ColorClassMap map = {});

/// gray8 pixels become (v, v, v); rgb8 pixels are copied.
RgbMask rgb_from_raster(const Raster2D& raster);

/// A pixel with at least one in-bounds neighbour, none of which share its label.
bool has_singleton(const LabelMask& mask, Neighborhood nb);

namespace serial {

// Straightforward single-threaded versions of the rules above. They share no
// code with the parallel kernels and exist to cross-check them.
RgbMask remove_outlines(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
RgbMask fix_disagreeing_borders(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
RgbMask replace_singletons(const RgbMask& mask, Neighborhood nb, ColorClassMap map = {});
AptaResult apta(const RgbMask& mask, const PaletteRules& rules, Neighborhood nb,
                int max_rounds = kDefaultMaxRounds);

}  // namespace serial

}  // namespace spinecurate
