#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "spinecurate/error.hpp"
#include "spinecurate/png_io.hpp"

using namespace spinecurate;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "spinecurate_png_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Png, GrayRoundTrip) {
  Raster2D r{5, 3, PixelFormat::gray8, {}};
  for (int i = 0; i < 15; ++i) r.pixels.push_back(static_cast<std::uint8_t>(i * 17));
  write_png(scratch("g.png"), r);
  const auto back = read_png(scratch("g.png"));
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.format, PixelFormat::gray8);
  EXPECT_EQ(back.pixels, r.pixels);
}

TEST(Png, RgbRoundTripAndStableBytes) {
  Raster2D r{2, 2, PixelFormat::rgb8, {255, 0, 0, 0, 255, 0, 0, 0, 255, 0, 0, 0}};
  write_png(scratch("a.png"), r);
  write_png(scratch("b.png"), r);
  EXPECT_EQ(read_png(scratch("a.png")).pixels, r.pixels);
  EXPECT_EQ(slurp(scratch("a.png")), slurp(scratch("b.png")));
}

TEST(Png, MissingFileIsIoError) {
  try {
    read_png(scratch("does_not_exist.png"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
}

TEST(Png, GarbageIsIoError) {
  std::ofstream(scratch("junk.png"), std::ios::binary) << "not a png at all";
  EXPECT_THROW(read_png(scratch("junk.png")), Error);
}
