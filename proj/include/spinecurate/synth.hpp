#pragma once

// Seeded synthetic lumbar-spine-like fixtures: clean 4-class label layouts,
// defective colour renderings of them, and MetaImage volume pairs.

#include <cstdint>
#include <filesystem>
#include <string>

#include "spinecurate/dataset_filter.hpp"
#include "spinecurate/image.hpp"
#include "spinecurate/volume_io.hpp"

namespace spinecurate::synth {

/// Vertebra blocks stacked vertically, discs between them, and a canal band
/// to their right. `scale` in (0, 1] shrinks the anatomy relative to the
/// frame (smaller scale -> more dominant background).
LabelMask spine_labels(int width, int height, std::uint64_t seed, double scale = 1.0);

enum class Defect {
  shaded,       // several dark/mid/light shades per class, outlines, speckle
  missing_red,  // as shaded, but vertebrae are not drawn at all
};

/// Renders labels with up to 16 distinct colours (black included).
RgbMask render_defective(const LabelMask& labels, std::uint64_t seed, Defect defect);

/// Gray rendering of render_defective: each pixel is (v, v, v) -> v.
Raster2D render_defective_gray(const LabelMask& labels, std::uint64_t seed, Defect defect);

/// Copy of `labels` with about `fraction` of the pixels set to a random
/// class, for use as imperfect predictions.
LabelMask perturb_labels(const LabelMask& labels, std::uint64_t seed, double fraction);

struct VolumePair {
  Volume image;
  Volume mask;
};

/// Slices along z. Slice 0 is background only, slice 1 lacks discs, the rest
/// vary in anatomy scale. Image voxels are int16 intensities, mask voxels are
/// uint8 defective gray shades.
VolumePair volume_pair(int width, int height, int depth, std::uint64_t seed);

/// Writes <dir>/images/<stem>.mha and <dir>/masks/<stem>.mha for
/// `volumes` stems cycling through the t1, t2 and t2_SPACE series.
void write_dataset(const std::filesystem::path& dir, int volumes, int width, int height,
                   int depth, std::uint64_t seed);

}  // namespace spinecurate::synth
