#include <cstring>
#include <string>

#include <gtest/gtest.h>

#include "spinecurate/error.hpp"
#include "spinecurate/volume_io.hpp"

using namespace spinecurate;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Errc error_of(const std::string& text) {
  try {
    read_volume(bytes_of(text));
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return Errc::io;
}

Raster2D gray(int w, int h, std::vector<std::uint8_t> px) { return {w, h, PixelFormat::gray8, std::move(px)}; }

}  // namespace

TEST(MhaHeader, ParsesFieldByField) {
  const std::string text =
      "NDims = 3\nDimSize = 512 640 15\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n";
  const auto h = parse_mha_header(bytes_of(text));
  EXPECT_EQ(h.ndims, 3);
  EXPECT_EQ(h.dim_size, (std::array<std::int64_t, 3>{512, 640, 15}));
  EXPECT_EQ(h.element_type, ElementType::uint8);
  EXPECT_EQ(h.header_byte_length, text.size());
  EXPECT_TRUE(h.binary_data);
  EXPECT_FALSE(h.byte_order_msb);
  EXPECT_EQ(h.element_spacing, (std::array<double, 3>{1.0, 1.0, 1.0}));
}

TEST(MhaHeader, KeepsUnknownKeys) {
  const std::string text =
      "ObjectType = Image\nNDims = 3\nAnatomicalOrientation = RAI\nDimSize = 1 1 1\n"
      "ElementSpacing = 0.5 0.5 3.3\nElementType = MET_SHORT\nElementDataFile = LOCAL\n";
  const auto h = parse_mha_header(bytes_of(text));
  ASSERT_EQ(h.extra_keys.size(), 2u);
  EXPECT_EQ(h.extra_keys[0].first, "ObjectType");
  EXPECT_EQ(h.extra_keys[1].second, "RAI");
  EXPECT_DOUBLE_EQ(h.element_spacing[2], 3.3);
  EXPECT_EQ(h.element_type, ElementType::int16);
}

TEST(MhaHeader, ErrorClasses) {
  EXPECT_EQ(error_of("NDims = 3\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n"), Errc::missing_key);
  EXPECT_EQ(error_of("DimSize = 1 1 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n"),
            Errc::missing_key);
  EXPECT_EQ(error_of("NDims = 3\nDimSize = 1 1 1\nElementDataFile = LOCAL\n"), Errc::missing_key);
  EXPECT_EQ(error_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_UCHAR\n"), Errc::missing_key);
  EXPECT_EQ(error_of("NDims = 2\nDimSize = 1 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n"),
            Errc::unsupported_value);
  EXPECT_EQ(error_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_DOUBLE\nElementDataFile = LOCAL\n"),
            Errc::unsupported_value);
  EXPECT_EQ(error_of("NDims = 3\nDimSize = 1 1 1\nElementType = MET_UCHAR\nElementDataFile = x.raw\n"),
            Errc::unsupported_value);
  EXPECT_EQ(error_of("NDims = 3\nCompressedData = True\nDimSize = 1 1 1\nElementType = MET_UCHAR\n"
                     "ElementDataFile = LOCAL\n"),
            Errc::unsupported_value);
  EXPECT_EQ(error_of("NDims = 3\nDimSize 1 1 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n"),
            Errc::malformed_line);
  EXPECT_EQ(error_of("NDims = 3\nDimSize = 1 x 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n"),
            Errc::malformed_line);
}

TEST(MhaPayload, HandBuiltUint8) {
  auto bytes = bytes_of("NDims = 3\nDimSize = 2 2 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n");
  for (std::uint8_t b : {1, 2, 3, 4}) bytes.push_back(b);
  const auto v = read_volume(bytes);
  EXPECT_EQ(std::get<std::vector<std::uint8_t>>(v.voxels), (std::vector<std::uint8_t>{1, 2, 3, 4}));
  EXPECT_EQ(v.value(1, 1, 0), 4.0);
}

TEST(MhaPayload, SizeMismatch) {
  const std::string head = "NDims = 3\nDimSize = 2 2 1\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n";
  EXPECT_EQ(error_of(head + "abc"), Errc::truncated_payload);
  EXPECT_EQ(error_of(head + "abcde"), Errc::excess_payload);
}

TEST(MhaPayload, BigEndianShorts) {
  auto bytes = bytes_of(
      "NDims = 3\nDimSize = 2 1 1\nBinaryDataByteOrderMSB = True\nElementType = MET_SHORT\n"
      "ElementDataFile = LOCAL\n");
  for (std::uint8_t b : {0x01, 0x02, 0xFF, 0xFE}) bytes.push_back(b);
  const auto v = read_volume(bytes);
  EXPECT_EQ(std::get<std::vector<std::int16_t>>(v.voxels), (std::vector<std::int16_t>{0x0102, -2}));
  const auto again = read_volume(write_volume(v));
  EXPECT_TRUE(again.header.byte_order_msb);
  EXPECT_EQ(again.header.dim_size, v.header.dim_size);
  EXPECT_EQ(again.voxels, v.voxels);
}

TEST(MhaPayload, WriteReadIsByteIdentical) {
  Volume v = make_volume({3, 2, 2}, std::vector<float>{0.f, 1.5f, -2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f, 9.f, 10.f, 1e-3f},
                         {0.7, 0.7, 3.3});
  const auto bytes = write_volume(v);
  const auto back = read_volume(bytes);
  EXPECT_EQ(write_volume(back), bytes);
  EXPECT_EQ(back.voxels, v.voxels);
}

TEST(Slices, SagittalPerSliceConstants) {
  std::vector<std::uint8_t> vox(4 * 4 * 3);
  for (int z = 0; z < 3; ++z) std::fill_n(vox.begin() + z * 16, 16, static_cast<std::uint8_t>(10 * (z + 1)));
  const auto slices = extract_slices(make_volume({4, 4, 3}, vox), {}, SliceMode::mask);
  ASSERT_EQ(slices.size(), 3u);
  for (int z = 0; z < 3; ++z) {
    EXPECT_EQ(slices[z].width, 4);
    EXPECT_EQ(slices[z].height, 4);
    for (auto p : slices[z].pixels) EXPECT_EQ(p, 10 * (z + 1));
  }
}

TEST(Slices, AxialOverrideUsesX) {
  std::vector<std::uint8_t> vox(2 * 3 * 4);
  for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<std::uint8_t>(i);
  const auto vol = make_volume({2, 3, 4}, vox, {0.5, 0.6, 3.0});
  SliceSpec spec;
  spec.axis = SliceAxis::axial_override;
  const auto slices = extract_slices(vol, spec, SliceMode::mask);
  ASSERT_EQ(slices.size(), 2u);
  EXPECT_EQ(slices[0].width, 3);
  EXPECT_EQ(slices[0].height, 4);
  // Row z, column y of slice x holds voxel (x, y, z).
  EXPECT_EQ(slices[1].pixels[2 * 3 + 1], vol.value(1, 1, 2));
  EXPECT_EQ(slice_spacing(vol.header, spec), (std::array<double, 2>{3.0, 0.6}));
}

TEST(Slices, ImageModeScalesMinMax) {
  const auto vol = make_volume({3, 1, 1}, std::vector<std::int16_t>{-100, 0, 100});
  const auto s = extract_slices(vol, {}, SliceMode::image);
  EXPECT_EQ(s[0].pixels, (std::vector<std::uint8_t>{0, 128, 255}));
}

TEST(Slices, MaskModeRejectsNonIntegers) {
  const auto vol = make_volume({2, 1, 1}, std::vector<float>{1.0f, 2.5f});
  EXPECT_THROW(extract_slices(vol, {}, SliceMode::mask), Error);
}

TEST(Orientation, RotateAndFlip) {
  const auto r = gray(2, 2, {1, 2, 3, 4});
  SliceSpec half;
  half.rotate_quarter_turns = 2;
  EXPECT_EQ(apply_orientation(r, half).pixels, (std::vector<std::uint8_t>{4, 3, 2, 1}));
  SliceSpec fh;
  fh.flip_horizontal = true;
  EXPECT_EQ(apply_orientation(r, fh).pixels, (std::vector<std::uint8_t>{2, 1, 4, 3}));
  SliceSpec cw;
  cw.rotate_quarter_turns = 1;
  EXPECT_EQ(apply_orientation(r, cw).pixels, (std::vector<std::uint8_t>{3, 1, 4, 2}));
}

TEST(Orientation, FlipTwiceRestores) {
  const auto r = gray(3, 2, {1, 2, 3, 4, 5, 6});
  SliceSpec both;
  both.flip_horizontal = both.flip_vertical = true;
  EXPECT_EQ(apply_orientation(apply_orientation(r, both), both).pixels, r.pixels);
  SliceSpec bad;
  bad.rotate_quarter_turns = 4;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(LabelEncoding, Bijection) {
  LabelMask m(8, 8, 0);
  for (std::size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = static_cast<ClassId>((i * 7 + i / 3) % 4);
  const auto enc = encode_label_raster(m);
  EXPECT_EQ(enc.pixels[1], 255 * ((7 + 0) % 4) / 3);
  EXPECT_EQ(decode_label_raster(enc).labels, m.labels);
  EXPECT_EQ(encode_label_raster(LabelMask(3, 3, 0)).pixels, std::vector<std::uint8_t>(9, 0));
}

TEST(LabelEncoding, UnknownLevel) {
  try {
    decode_label_raster(gray(2, 1, {0, 100}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_level);
  }
}
