#pragma once

// Minimal MetaImage (.mha) reader/writer and 2D slice extraction.
//
// Supported subset: NDims = 3, ElementDataFile = LOCAL, uncompressed binary
// payload of MET_UCHAR, MET_SHORT, MET_USHORT or MET_FLOAT voxels stored
// x-fastest. Unrecognised keys are kept verbatim in VolumeHeader::extra_keys.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spinecurate/image.hpp"

namespace spinecurate {

enum class ElementType { uint8, int16, uint16, float32 };

std::size_t element_size(ElementType type) noexcept;
std::string_view met_name(ElementType type) noexcept;

struct VolumeHeader {
  int ndims = 3;
  std::array<std::int64_t, 3> dim_size{1, 1, 1};
  ElementType element_type = ElementType::uint8;
  std::array<double, 3> element_spacing{1.0, 1.0, 1.0};
  std::size_t header_byte_length = 0;
  bool binary_data = true;
  bool byte_order_msb = false;
  std::vector<std::pair<std::string, std::string>> extra_keys;

  std::int64_t voxel_count() const { return dim_size[0] * dim_size[1] * dim_size[2]; }
  bool operator==(const VolumeHeader&) const = default;
};

using VoxelData = std::variant<std::vector<std::uint8_t>, std::vector<std::int16_t>,
                               std::vector<std::uint16_t>, std::vector<float>>;

struct Volume {
  VolumeHeader header;
  VoxelData voxels;

  /// Voxel value at (x, y, z) widened to double.
  double value(std::int64_t x, std::int64_t y, std::int64_t z) const;
};

/// Throws Error{missing_key | unsupported_value | malformed_line}.
VolumeHeader parse_mha_header(std::span<const std::uint8_t> bytes);

/// Throws Error{truncated_payload | excess_payload} on payload size mismatch,
/// plus anything parse_mha_header throws.
Volume read_volume(std::span<const std::uint8_t> bytes);

/// Serialises with a canonical header layout; the payload is written in the
/// byte order declared by header.byte_order_msb.
std::vector<std::uint8_t> write_volume(const Volume& volume);

Volume make_volume(std::array<std::int64_t, 3> dims, VoxelData voxels,
                   std::array<double, 3> spacing = {1.0, 1.0, 1.0});

Volume read_volume_file(const std::filesystem::path& path);
void write_volume_file(const std::filesystem::path& path, const Volume& volume);

enum class SliceAxis { sagittal_default, axial_override };

struct SliceSpec {
  SliceAxis axis = SliceAxis::sagittal_default;
  int rotate_quarter_turns = 0;  // clockwise
  bool flip_horizontal = false;
  bool flip_vertical = false;

  void validate() const;
  bool operator==(const SliceSpec&) const = default;
};

/// image: per-slice min-max scaling to gray8. mask: values copied unchanged
/// and must already be integers in [0, 255].
enum class SliceMode { image, mask };

/// One gray8 raster per index along the slicing axis, in increasing index
/// order, each passed through apply_orientation. Before orientation,
/// sagittal_default slices along z (width = x, height = y) and
/// axial_override slices along x (width = y, height = z).
std::vector<Raster2D> extract_slices(const Volume& volume, const SliceSpec& spec, SliceMode mode);

/// In-plane spacing (row, col) of the rasters extract_slices produces.
std::array<double, 2> slice_spacing(const VolumeHeader& header, const SliceSpec& spec);

/// Rotation first, then horizontal flip, then vertical flip.
Raster2D apply_orientation(const Raster2D& raster, const SliceSpec& spec);

/// gray8 raster with class levels {0, 85, 170, 255}.
Raster2D encode_label_raster(const LabelMask& mask);
/// Throws Error{unknown_level} for any other gray value or an rgb8 raster.
LabelMask decode_label_raster(const Raster2D& raster);

}  // namespace spinecurate
