#include "spinecurate/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (iequals(v, "true") || v == "1") return true;
  if (iequals(v, "false") || v == "0") return false;
  throw Error(Errc::malformed_line, fmt::format("{}: expected True/False, got '{}'", key, v));
}

template <typename T>
T parse_number(std::string_view key, std::string_view token) {
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(Errc::malformed_line, fmt::format("{}: cannot parse '{}'", key, token));
  }
  return value;
}

ElementType parse_element_type(std::string_view v) {
  if (v == "MET_UCHAR") return ElementType::uint8;
  if (v == "MET_SHORT") return ElementType::int16;
  if (v == "MET_USHORT") return ElementType::uint16;
  if (v == "MET_FLOAT") return ElementType::float32;
  throw Error(Errc::unsupported_value, fmt::format("ElementType '{}'", v));
}

template <typename T>
T byteswap_value(T v) {
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), &v, sizeof(T));
  std::reverse(raw.begin(), raw.end());
  std::memcpy(&v, raw.data(), sizeof(T));
  return v;
}

constexpr bool kHostIsMsb = std::endian::native == std::endian::big;

template <typename T>
std::vector<T> decode_payload(std::span<const std::uint8_t> bytes, bool msb) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  if constexpr (sizeof(T) > 1) {
    if (msb != kHostIsMsb) {
      for (auto& v : out) v = byteswap_value(v);
    }
  }
  return out;
}

template <typename T>
void encode_payload(const std::vector<T>& values, bool msb, std::vector<std::uint8_t>& out) {
  const std::size_t offset = out.size();
  out.resize(offset + values.size() * sizeof(T));
  if constexpr (sizeof(T) > 1) {
    if (msb != kHostIsMsb) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const T swapped = byteswap_value(values[i]);
        std::memcpy(out.data() + offset + i * sizeof(T), &swapped, sizeof(T));
      }
      return;
    }
  }
  std::memcpy(out.data() + offset, values.data(), values.size() * sizeof(T));
}

ElementType element_type_of(const VoxelData& data) {
  return static_cast<ElementType>(data.index());
}

std::size_t voxel_data_size(const VoxelData& data) {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

}  // namespace

std::size_t element_size(ElementType type) noexcept {
  switch (type) {
    case ElementType::uint8: return 1;
    case ElementType::int16:
    case ElementType::uint16: return 2;
    case ElementType::float32: return 4;
  }
  return 0;
}

std::string_view met_name(ElementType type) noexcept {
  switch (type) {
    case ElementType::uint8: return "MET_UCHAR";
    case ElementType::int16: return "MET_SHORT";
    case ElementType::uint16: return "MET_USHORT";
    case ElementType::float32: return "MET_FLOAT";
  }
  return "";
}

double Volume::value(std::int64_t x, std::int64_t y, std::int64_t z) const {
  const auto& d = header.dim_size;
  const auto index = static_cast<std::size_t>(x + d[0] * (y + d[1] * z));
  return std::visit([index](const auto& v) { return static_cast<double>(v[index]); }, voxels);
}

VolumeHeader parse_mha_header(std::span<const std::uint8_t> bytes) {
  VolumeHeader header;
  std::optional<int> ndims;
  std::optional<std::vector<std::int64_t>> dims;
  std::optional<ElementType> type;
  std::optional<std::vector<double>> spacing;

  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;
  bool terminated = false;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    const bool last_line = eol == std::string_view::npos;
    if (last_line) eol = text.size();
    const std::string_view raw = text.substr(pos, eol - pos);
    pos = last_line ? text.size() : eol + 1;

    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::malformed_line, fmt::format("no '=' in header line '{}'", line));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(Errc::malformed_line, fmt::format("empty key in '{}'", line));

    if (key == "ElementDataFile") {
      if (value != "LOCAL") {
        throw Error(Errc::unsupported_value, fmt::format("ElementDataFile '{}'", value));
      }
      header.header_byte_length = pos;
      terminated = true;
      break;
    }
    if (key == "NDims") {
      ndims = parse_number<int>(key, value);
      if (*ndims != 3) throw Error(Errc::unsupported_value, fmt::format("NDims = {}", *ndims));
    } else if (key == "DimSize") {
      std::vector<std::int64_t> v;
      for (auto tok : split_ws(value)) v.push_back(parse_number<std::int64_t>(key, tok));
      dims = std::move(v);
    } else if (key == "ElementType") {
      type = parse_element_type(value);
    } else if (key == "ElementSpacing") {
      std::vector<double> v;
      for (auto tok : split_ws(value)) v.push_back(parse_number<double>(key, tok));
      spacing = std::move(v);
    } else if (key == "BinaryData") {
      header.binary_data = parse_bool(key, value);
      if (!header.binary_data) throw Error(Errc::unsupported_value, "BinaryData = False");
    } else if (key == "BinaryDataByteOrderMSB" || key == "ElementByteOrderMSB") {
      header.byte_order_msb = parse_bool(key, value);
    } else if (key == "CompressedData") {
      if (parse_bool(key, value)) throw Error(Errc::unsupported_value, "CompressedData = True");
    } else {
      header.extra_keys.emplace_back(std::string(key), std::string(value));
    }
  }

  if (!ndims) throw Error(Errc::missing_key, "NDims");
  if (!dims) throw Error(Errc::missing_key, "DimSize");
  if (!type) throw Error(Errc::missing_key, "ElementType");
  if (!terminated) throw Error(Errc::missing_key, "ElementDataFile");

  if (dims->size() != 3) {
    throw Error(Errc::unsupported_value, fmt::format("DimSize has {} entries", dims->size()));
  }
  for (int i = 0; i < 3; ++i) {
    if ((*dims)[i] < 1) throw Error(Errc::unsupported_value, "DimSize entries must be >= 1");
    header.dim_size[i] = (*dims)[i];
  }
  header.ndims = *ndims;
  header.element_type = *type;
  if (spacing) {
    if (spacing->size() != 3) {
      throw Error(Errc::unsupported_value, "ElementSpacing must have 3 entries");
    }
    for (int i = 0; i < 3; ++i) {
      if (!((*spacing)[i] > 0.0)) throw Error(Errc::unsupported_value, "ElementSpacing <= 0");
      header.element_spacing[i] = (*spacing)[i];
    }
  }
  return header;
}

Volume read_volume(std::span<const std::uint8_t> bytes) {
  Volume vol;
  vol.header = parse_mha_header(bytes);
  const auto& h = vol.header;
  const auto expected = static_cast<std::size_t>(h.voxel_count()) * element_size(h.element_type);
  const auto available = bytes.size() - h.header_byte_length;
  if (available < expected) {
    throw Error(Errc::truncated_payload,
                fmt::format("expected {} payload bytes, found {}", expected, available));
  }
  if (available > expected) {
    throw Error(Errc::excess_payload,
                fmt::format("expected {} payload bytes, found {}", expected, available));
  }
  const auto payload = bytes.subspan(h.header_byte_length);
  switch (h.element_type) {
    case ElementType::uint8: vol.voxels = decode_payload<std::uint8_t>(payload, false); break;
    case ElementType::int16:
      vol.voxels = decode_payload<std::int16_t>(payload, h.byte_order_msb);
      break;
    case ElementType::uint16:
      vol.voxels = decode_payload<std::uint16_t>(payload, h.byte_order_msb);
      break;
    case ElementType::float32:
      vol.voxels = decode_payload<float>(payload, h.byte_order_msb);
      break;
  }
  return vol;
}

std::vector<std::uint8_t> write_volume(const Volume& volume) {
  const auto& h = volume.header;
  if (element_type_of(volume.voxels) != h.element_type) {
    throw Error(Errc::invalid_argument, "voxel storage does not match header element type");
  }
  if (static_cast<std::int64_t>(voxel_data_size(volume.voxels)) != h.voxel_count()) {
    throw Error(Errc::invalid_argument, "voxel count does not match DimSize");
  }
  std::string text;
  for (const auto& [k, v] : h.extra_keys) text += fmt::format("{} = {}\n", k, v);
  text += "NDims = 3\n";
  text += "BinaryData = True\n";
  text += fmt::format("BinaryDataByteOrderMSB = {}\n", h.byte_order_msb ? "True" : "False");
  text += fmt::format("ElementSpacing = {} {} {}\n", h.element_spacing[0], h.element_spacing[1],
                      h.element_spacing[2]);
  text += fmt::format("DimSize = {} {} {}\n", h.dim_size[0], h.dim_size[1], h.dim_size[2]);
  text += fmt::format("ElementType = {}\n", met_name(h.element_type));
  text += "ElementDataFile = LOCAL\n";

  std::vector<std::uint8_t> out(text.begin(), text.end());
  std::visit([&](const auto& v) { encode_payload(v, h.byte_order_msb, out); }, volume.voxels);
  return out;
}

Volume make_volume(std::array<std::int64_t, 3> dims, VoxelData voxels,
                   std::array<double, 3> spacing) {
  Volume vol;
  vol.header.dim_size = dims;
  vol.header.element_type = element_type_of(voxels);
  vol.header.element_spacing = spacing;
  vol.voxels = std::move(voxels);
  if (static_cast<std::int64_t>(voxel_data_size(vol.voxels)) != vol.header.voxel_count()) {
    throw Error(Errc::invalid_argument, "voxel count does not match dimensions");
  }
  return vol;
}

Volume read_volume_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, fmt::format("cannot open {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return read_volume(bytes);
}

void write_volume_file(const std::filesystem::path& path, const Volume& volume) {
  const auto bytes = write_volume(volume);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, fmt::format("cannot create {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, fmt::format("write failed for {}", path.string()));
}

void SliceSpec::validate() const {
  if (rotate_quarter_turns < 0 || rotate_quarter_turns > 3) {
    throw Error(Errc::invalid_argument,
                fmt::format("rotate_quarter_turns must be 0-3, got {}", rotate_quarter_turns));
  }
}

Raster2D apply_orientation(const Raster2D& raster, const SliceSpec& spec) {
  spec.validate();
  const int ch = raster.channels();
  Raster2D cur = raster;
  for (int t = 0; t < spec.rotate_quarter_turns; ++t) {
    // Clockwise: out(r, c) = in(H - 1 - c, r), output is H wide and W tall.
    Raster2D next{cur.height, cur.width, cur.format, std::vector<std::uint8_t>(cur.pixels.size())};
    for (int r = 0; r < next.height; ++r) {
      for (int c = 0; c < next.width; ++c) {
        const auto src = (static_cast<std::size_t>(cur.height - 1 - c) * cur.width + r) * ch;
        const auto dst = (static_cast<std::size_t>(r) * next.width + c) * ch;
        std::copy_n(cur.pixels.begin() + src, ch, next.pixels.begin() + dst);
      }
    }
    cur = std::move(next);
  }
  if (spec.flip_horizontal) {
    for (int r = 0; r < cur.height; ++r) {
      for (int c = 0; c < cur.width / 2; ++c) {
        const auto a = (static_cast<std::size_t>(r) * cur.width + c) * ch;
        const auto b = (static_cast<std::size_t>(r) * cur.width + (cur.width - 1 - c)) * ch;
        std::swap_ranges(cur.pixels.begin() + a, cur.pixels.begin() + a + ch,
                         cur.pixels.begin() + b);
      }
    }
  }
  if (spec.flip_vertical) {
    const auto row_bytes = static_cast<std::size_t>(cur.width) * ch;
    for (int r = 0; r < cur.height / 2; ++r) {
      std::swap_ranges(cur.pixels.begin() + r * row_bytes, cur.pixels.begin() + (r + 1) * row_bytes,
                       cur.pixels.begin() + (cur.height - 1 - r) * row_bytes);
    }
  }
  return cur;
}

std::vector<Raster2D> extract_slices(const Volume& volume, const SliceSpec& spec, SliceMode mode) {
  spec.validate();
  const auto& d = volume.header.dim_size;
  const bool along_x = spec.axis == SliceAxis::axial_override;
  const auto count = along_x ? d[0] : d[2];
  const int width = static_cast<int>(along_x ? d[1] : d[0]);
  const int height = static_cast<int>(along_x ? d[2] : d[1]);

  std::vector<Raster2D> slices(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < count; ++s) {
    std::vector<double> values(static_cast<std::size_t>(width) * height);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        values[static_cast<std::size_t>(r) * width + c] =
            along_x ? volume.value(s, c, r) : volume.value(c, r, s);
      }
    }
    Raster2D raster{width, height, PixelFormat::gray8, std::vector<std::uint8_t>(values.size())};
    if (mode == SliceMode::image) {
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      const double lo_v = values.empty() ? 0.0 : *lo;
      const double range = values.empty() ? 0.0 : *hi - lo_v;
      for (std::size_t i = 0; i < values.size(); ++i) {
        raster.pixels[i] =
            range > 0.0 ? static_cast<std::uint8_t>(std::lround((values[i] - lo_v) / range * 255.0))
                        : 0;
      }
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
          // Exceptions cannot leave the parallel region; reported below.
          raster.pixels.clear();
          break;
        }
        raster.pixels[i] = static_cast<std::uint8_t>(v);
      }
    }
    slices[static_cast<std::size_t>(s)] = std::move(raster);
  }
  for (std::size_t s = 0; s < slices.size(); ++s) {
    if (!slices[s].valid()) {
      throw Error(Errc::unsupported_value,
                  fmt::format("mask slice {} holds values outside 0-255 integers", s));
    }
    slices[s] = apply_orientation(slices[s], spec);
  }
  return slices;
}

std::array<double, 2> slice_spacing(const VolumeHeader& header, const SliceSpec& spec) {
  const auto& sp = header.element_spacing;
  std::array<double, 2> rc = spec.axis == SliceAxis::axial_override
                                 ? std::array<double, 2>{sp[2], sp[1]}
                                 : std::array<double, 2>{sp[1], sp[0]};
  if (spec.rotate_quarter_turns % 2 == 1) std::swap(rc[0], rc[1]);
  return rc;
}

namespace {
constexpr std::array<std::uint8_t, kNumClasses> kClassLevels{0, 85, 170, 255};
}

Raster2D encode_label_raster(const LabelMask& mask) {
  Raster2D out{mask.width, mask.height, PixelFormat::gray8,
               std::vector<std::uint8_t>(mask.labels.size())};
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    const auto c = mask.labels[i];
    if (c >= kNumClasses) throw Error(Errc::invalid_argument, fmt::format("label {}", int(c)));
    out.pixels[i] = kClassLevels[c];
  }
  return out;
}

LabelMask decode_label_raster(const Raster2D& raster) {
  if (raster.format != PixelFormat::gray8) {
    throw Error(Errc::unknown_level, "label rasters must be gray8");
  }
  LabelMask mask(raster.width, raster.height);
  for (std::size_t i = 0; i < raster.pixels.size(); ++i) {
    const auto v = raster.pixels[i];
    const auto it = std::find(kClassLevels.begin(), kClassLevels.end(), v);
    if (it == kClassLevels.end()) {
      throw Error(Errc::unknown_level, fmt::format("gray level {} at pixel {}", int(v), i));
    }
    mask.labels[i] = static_cast<ClassId>(it - kClassLevels.begin());
  }
  return mask;
}

}  // namespace spinecurate
