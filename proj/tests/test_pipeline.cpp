#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.hpp"
#include "spinecurate/error.hpp"
#include "spinecurate/manifest.hpp"
#include "spinecurate/pipeline.hpp"
#include "spinecurate/png_io.hpp"
#include "spinecurate/synth.hpp"

using namespace spinecurate;
namespace fs = std::filesystem;

namespace {

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root = fs::temp_directory_path() / "spinecurate_pipeline" / info->name();
    fs::remove_all(root);
    fs::create_directories(root);
    cfg.input = root / "in";
    cfg.output = root / "out";
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  Errc error_of(const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error";
    return Errc::io;
  }

  // Kept entries whose restored masks are the given label masks.
  void write_kept(const std::vector<std::pair<std::string, LabelMask>>& items, Series series) {
    std::vector<ManifestEntry> entries;
    fs::create_directories(cfg.output / "restored");
    for (const auto& [id, labels] : items) {
      ManifestEntry e;
      e.id = id;
      e.series = series;
      e.restored_ref = "restored/" + id + ".png";
      e.mask_ref = "masks/" + id + ".png";
      e.stats = class_census(labels);
      e.verdict = Verdict::kept;
      write_png(cfg.output / e.restored_ref, encode_label_raster(labels));
      entries.push_back(e);
    }
    save_manifest(cfg.manifest_path(), entries);
  }

  fs::path root;
  PipelineConfig cfg;
};

}  // namespace

TEST_F(PipelineTest, ExtractCountsEntries) {
  synth::write_dataset(cfg.input, 2, 16, 20, 3, 1);
  const auto r = run_extract(cfg);
  EXPECT_EQ(r.entries, 6);
  const auto m = load_manifest(cfg.manifest_path());
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(m[0].id, "1_t1_s000");
  EXPECT_EQ(m[5].id, "1_t2_s002");
  EXPECT_EQ(m[5].series, Series::T2);
  EXPECT_TRUE(fs::exists(cfg.output / m[4].image_ref));
  EXPECT_EQ(read_png(cfg.output / m[4].mask_ref).width, 16);
  EXPECT_EQ(error_of([&] { run_extract(cfg); }), Errc::out_of_order);
  cfg.force = true;
  EXPECT_EQ(run_extract(cfg).entries, 6);
}

TEST_F(PipelineTest, AxialOverride) {
  synth::write_dataset(cfg.input, 2, 16, 20, 3, 1);
  std::ofstream(cfg.input / "overrides.ini") << "[1_t2]\naxis = axial_override\nrotate = 1\n";
  run_extract(cfg);
  const auto m = load_manifest(cfg.manifest_path());
  ASSERT_EQ(m.size(), 3u + 16u);
  const auto& e = m.back();
  EXPECT_EQ(e.id, "1_t2_s015");
  EXPECT_EQ(e.slice_spec.axis, SliceAxis::axial_override);
  // Axial slices are 20 (y) wide and 3 (z) tall; a quarter turn swaps them.
  const auto png = read_png(cfg.output / e.mask_ref);
  EXPECT_EQ(png.width, 3);
  EXPECT_EQ(png.height, 20);
}

TEST_F(PipelineTest, CorruptVolumeFlagged) {
  synth::write_dataset(cfg.input, 3, 16, 20, 3, 1);
  std::ofstream(cfg.input / "masks" / "1_t2.mha", std::ios::trunc)
      << "NDims = 3\nDimSize = 16 20 3\nElementType = MET_UCHAR\nElementDataFile = LOCAL\nxx";
  const auto r = run_extract(cfg);
  EXPECT_EQ(r.failed, 1);
  const auto m = load_manifest(cfg.manifest_path());
  ASSERT_EQ(m.size(), 7u);
  const auto bad = std::find_if(m.begin(), m.end(), [](auto& e) { return e.verdict == Verdict::failed; });
  EXPECT_EQ(bad->volume, "1_t2");
  EXPECT_NE(bad->error.find("TruncatedPayload"), std::string::npos);
  run_restore(cfg);
  run_filter(cfg);
  EXPECT_EQ(load_manifest(cfg.manifest_path())[3].verdict, Verdict::failed);
}

TEST_F(PipelineTest, OutOfOrderCommands) {
  EXPECT_EQ(error_of([&] { run_restore(cfg); }), Errc::out_of_order);
  ManifestEntry e;
  e.id = "x";
  save_manifest(cfg.manifest_path(), {e});
  const auto before = slurp(cfg.manifest_path());
  EXPECT_EQ(error_of([&] { run_restore(cfg); }), Errc::out_of_order);
  EXPECT_EQ(slurp(cfg.manifest_path()), before);
  EXPECT_FALSE(fs::exists(cfg.output / "restored"));
  EXPECT_EQ(error_of([&] { run_filter(cfg); }), Errc::out_of_order);
  EXPECT_EQ(error_of([&] { run_evaluate(cfg); }), Errc::out_of_order);
}

TEST_F(PipelineTest, CleanMasksRestoreUnchanged) {
  fs::create_directories(cfg.output / "masks");
  std::vector<ManifestEntry> entries;
  std::vector<LabelMask> truth;
  for (int k = 0; k < 3; ++k) {
    ManifestEntry e;
    e.id = "clean_" + std::to_string(k);
    e.mask_ref = "masks/" + e.id + ".png";
    const auto bad = synth::render_defective(synth::spine_labels(40, 48, 20 + k), k, synth::Defect::shaded);
    truth.push_back(apta(bad, {}, cfg.neighborhood).labels);
    const auto rgb = to_rgb(truth.back());
    Raster2D r{rgb.width, rgb.height, PixelFormat::rgb8, {}};
    for (auto p : rgb.pixels) r.pixels.insert(r.pixels.end(), {p.r, p.g, p.b});
    write_png(cfg.output / e.mask_ref, r);
    entries.push_back(e);
  }
  save_manifest(cfg.manifest_path(), entries);
  run_restore(cfg);
  const auto first = slurp(cfg.output / "restored" / "clean_1.png");
  const auto m = load_manifest(cfg.manifest_path());
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(decode_label_raster(read_png(cfg.output / m[k].restored_ref)).labels, truth[k].labels);
    EXPECT_EQ(m[k].restore->rounds, 1);
  }
  run_restore(cfg);
  EXPECT_EQ(slurp(cfg.output / "restored" / "clean_1.png"), first);
}

TEST_F(PipelineTest, FilterTenEntryFixture) {
  std::vector<ManifestEntry> entries;
  auto add = [&](std::array<std::int64_t, 4> counts) {
    ManifestEntry e;
    e.id = "e" + std::to_string(entries.size());
    ClassStats s;
    s.counts = counts;
    s.total = counts[0] + counts[1] + counts[2] + counts[3];
    e.stats = s;
    entries.push_back(e);
  };
  add({60, 40, 0, 0});
  add({50, 25, 25, 0});
  add({90, 0, 10, 0});
  add({70, 10, 10, 10});
  add({56, 20, 20, 4});
  add({55, 15, 15, 15});
  add({40, 20, 20, 20});
  add({30, 30, 30, 10});
  add({25, 25, 25, 25});
  add({50, 20, 20, 10});
  save_manifest(cfg.manifest_path(), entries);
  const auto s = run_filter(cfg);
  EXPECT_EQ(s.overall.kept, 5);
  EXPECT_EQ(s.overall.dropped_redundant, 3);
  EXPECT_EQ(s.overall.dropped_imbalanced, 2);
  EXPECT_EQ(s.overall.kept + s.overall.dropped_redundant + s.overall.dropped_imbalanced, 10);
  EXPECT_EQ(load_manifest(cfg.manifest_path())[5].verdict, Verdict::kept);
  const auto once = slurp(cfg.manifest_path());
  run_filter(cfg);
  EXPECT_EQ(slurp(cfg.manifest_path()), once);
  EXPECT_TRUE(fs::exists(cfg.output / "summary.txt"));

  cfg.threshold = 0.5;
  EXPECT_EQ(error_of([&] { run_filter(cfg); }), Errc::invalid_argument);
  EXPECT_EQ(slurp(cfg.manifest_path()), once);
  cfg.force = true;
  EXPECT_EQ(run_filter(cfg).overall.kept, 4);
}

TEST_F(PipelineTest, EvaluatePerfectAndMismatched) {
  std::vector<std::pair<std::string, LabelMask>> items;
  for (int k = 0; k < 3; ++k) items.push_back({"p" + std::to_string(k), synth::spine_labels(24, 32, k)});
  write_kept(items, Series::T2);
  cfg.input = root / "pred";
  fs::create_directories(cfg.input);
  for (const auto& [id, labels] : items) write_png(cfg.input / (id + ".png"), encode_label_raster(labels));
  write_png(cfg.input / "p2.png", encode_label_raster(LabelMask(5, 5, 0)));

  const auto r = run_evaluate(cfg);
  EXPECT_EQ(r.evaluated, 2);
  EXPECT_EQ(r.skipped, 1);
  const auto skipped = slurp(cfg.output / "evaluation" / "skipped.jsonl");
  EXPECT_NE(skipped.find("\"p2\""), std::string::npos);
  EXPECT_NE(skipped.find("ShapeMismatch"), std::string::npos);
  const auto agg = nlohmann::json::parse(slurp(cfg.output / "evaluation" / "aggregate.json"));
  for (const char* c : {"background", "vertebrae", "spinal_canal", "ivd"}) {
    EXPECT_EQ(agg["T2"]["classes"][c]["iou"].get<double>(), 1.0);
    EXPECT_EQ(agg["T2"]["classes"][c]["dice"].get<double>(), 1.0);
  }
  const auto table = slurp(cfg.output / "evaluation" / "aggregate.txt");
  const auto header = table.substr(0, table.find('\n'));
  const auto pos = [&](const char* s) { return header.find(s); };
  EXPECT_LT(pos("IoU"), pos("Dice"));
  EXPECT_LT(pos("Dice"), pos("ASD"));
  EXPECT_LT(pos("ASD"), pos("NSD"));
  EXPECT_LT(pos("NSD"), pos("Precision"));
  EXPECT_LT(pos("Precision"), pos("Recall"));
  EXPECT_LT(pos("Recall"), pos("F1"));
}

TEST_F(PipelineTest, SeriesMeansAreUnweighted) {
  std::vector<std::pair<std::string, LabelMask>> items;
  std::mt19937_64 rng(8);
  std::vector<LabelMask> preds;
  for (int k = 0; k < 3; ++k) {
    items.push_back({"q" + std::to_string(k), oracle::random_mask(rng, 6 + k, 5)});
    preds.push_back(oracle::random_mask(rng, 6 + k, 5));
  }
  write_kept(items, Series::T1);
  cfg.input = root / "pred";
  fs::create_directories(cfg.input);
  for (int k = 0; k < 3; ++k) write_png(cfg.input / (items[k].first + ".png"), encode_label_raster(preds[k]));
  run_evaluate(cfg);
  const auto agg = nlohmann::json::parse(slurp(cfg.output / "evaluation" / "aggregate.json"));
  for (ClassId c = 0; c < kNumClasses; ++c) {
    double iou_sum = 0, recall_sum = 0;
    for (int k = 0; k < 3; ++k) {
      const auto o = oracle::confusion(preds[k], items[k].second, c);
      iou_sum += oracle::iou(o);
      recall_sum += oracle::recall(o);
    }
    const auto& row = agg["T1"]["classes"][std::string(class_name(c))];
    EXPECT_NEAR(row["iou"].get<double>(), iou_sum / 3, 1e-12);
    EXPECT_NEAR(row["recall"].get<double>(), recall_sum / 3, 1e-12);
    EXPECT_EQ(row, agg["All"]["classes"][std::string(class_name(c))]);
  }
}

TEST_F(PipelineTest, LossCheckWritesAndVerifies) {
  const auto r = run_losscheck(cfg);
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.written.size(), 3u);
  const auto first = slurp(r.written[0]);
  run_losscheck(cfg);
  EXPECT_EQ(slurp(r.written[0]), first);

  PipelineConfig verify;
  verify.verify = r.written[0];
  EXPECT_TRUE(run_losscheck(verify).failures.empty());

  auto lines = first;
  auto j = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  j["focal"] = j["focal"].get<double>() + 1e-3;
  std::ofstream(root / "bad.jsonl") << j.dump() << "\n";
  verify.verify = root / "bad.jsonl";
  const auto bad = run_losscheck(verify);
  ASSERT_FALSE(bad.failures.empty());
  EXPECT_NE(bad.failures[0].find(j["id"].get<std::string>()), std::string::npos);
}
