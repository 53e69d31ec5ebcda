// Generates synthetic inputs for the curation pipeline.
//
//   spine_synth dataset --out DIR [--volumes 6] [--width 48] [--height 64] [--depth 6] [--seed 7]
//   spine_synth predictions --output OUT --dest DIR [--noise 0.02] [--seed 7]
//
// `predictions` writes one perturbed copy of every kept restored mask found in
// OUT/manifest.jsonl, named <id>.png as `spinecurate evaluate` expects.

#include <cstdint>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spinecurate/error.hpp"
#include "spinecurate/manifest.hpp"
#include "spinecurate/png_io.hpp"
#include "spinecurate/synth.hpp"

namespace fs = std::filesystem;
using namespace spinecurate;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic spine fixtures"};
  app.require_subcommand(1);

  auto* dataset = app.add_subcommand("dataset", "Write MHA image/mask volume pairs");
  fs::path out;
  int volumes = 6, width = 48, height = 64, depth = 6;
  std::uint64_t seed = 7;
  dataset->add_option("--out", out)->required();
  dataset->add_option("--volumes", volumes)->check(CLI::PositiveNumber);
  dataset->add_option("--width", width)->check(CLI::Range(8, 4096));
  dataset->add_option("--height", height)->check(CLI::Range(8, 4096));
  dataset->add_option("--depth", depth)->check(CLI::Range(1, 4096));
  dataset->add_option("--seed", seed);

  auto* preds = app.add_subcommand("predictions", "Write noisy predictions for kept entries");
  fs::path output, dest;
  double noise = 0.02;
  preds->add_option("--output", output, "Pipeline output directory")->required();
  preds->add_option("--dest", dest)->required();
  preds->add_option("--noise", noise)->check(CLI::Range(0.0, 1.0));
  preds->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);
  try {
    if (dataset->parsed()) {
      synth::write_dataset(out, volumes, width, height, depth, seed);
      fmt::print("wrote {} volume pairs to {}\n", volumes, out.string());
    } else {
      fs::create_directories(dest);
      int written = 0;
      for (const auto& e : load_manifest(output / "manifest.jsonl")) {
        if (e.verdict != Verdict::kept) continue;
        const auto gt = decode_label_raster(read_png(output / e.restored_ref));
        const auto pred = synth::perturb_labels(gt, seed + static_cast<std::uint64_t>(written), noise);
        write_png(dest / (e.id + ".png"), encode_label_raster(pred));
        ++written;
      }
      fmt::print("wrote {} predictions to {}\n", written, dest.string());
    }
  } catch (const Error& e) {
    fmt::print(stderr, "{}: {}\n", to_string(e.code()), e.what());
    return e.code() == Errc::io ? 2 : 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}\n", e.what());
    return 2;
  }
  return 0;
}
