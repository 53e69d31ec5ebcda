#pragma once

// The curation pipeline behind the command-line front end:
// extract -> restore -> filter -> evaluate -> loss-check -> report.
//
// Every command reads and rewrites one JSONL manifest (default
// <output>/manifest.jsonl) and writes its artefacts under <output>. Commands
// check that the previous stage has run and refuse to overwrite existing
// verdicts unless `force` is set.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spinecurate/config.hpp"
#include "spinecurate/dataset_filter.hpp"
#include "spinecurate/loss_math.hpp"
#include "spinecurate/mask_restore.hpp"
#include "spinecurate/seg_metrics.hpp"

namespace spinecurate {

enum class SpacingSource { pixel, header };

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path manifest;   // empty -> <output>/manifest.jsonl
  std::filesystem::path overrides;  // empty -> <input>/overrides.ini (extract only)
  std::filesystem::path verify;     // loss-check: vector file to verify instead of writing
  int workers = 0;                  // 0 -> OpenMP default
  bool force = false;

  PaletteRules palette;
  Neighborhood neighborhood;
  int max_rounds = kDefaultMaxRounds;

  ImbalanceMode imbalance_mode = ImbalanceMode::dominant_fraction;
  double threshold = kDefaultImbalanceThreshold;

  MetricConfig metrics;
  SpacingSource spacing_source = SpacingSource::pixel;

  LossParams loss;
  std::uint64_t loss_seed = 1;
  int loss_count = 24;

  std::filesystem::path manifest_path() const;
};

/// Builds a configuration from "section.key" values. Unknown keys and
/// malformed values throw Error{unsupported_value | invalid_argument}.
PipelineConfig pipeline_config_from(const KeyValues& kv);

/// Every key pipeline_config_from accepts.
const std::vector<std::string>& config_keys();

/// "3_t2_SPACE" -> T2_SPACE. The series is the suffix after the first '_'.
/// Throws Error{unsupported_value} for anything else.
Series series_from_stem(const std::string& stem);

/// Per-volume SliceSpec overrides from an INI file with one section per stem:
///   [3_t2]
///   axis = axial_override
///   rotate = 1
///   flip_h = true
std::map<std::string, SliceSpec> parse_slice_overrides(const KeyValues& kv);

struct ExtractResult {
  int volumes = 0;
  int entries = 0;
  int failed = 0;
};

struct RestoreResult {
  int restored = 0;
  int not_converged = 0;
  int failed = 0;
};

struct EvaluateResult {
  int evaluated = 0;
  int skipped = 0;
};

struct LossCheckResult {
  std::vector<std::string> lines;     // one per check, "PASS ..." or "FAIL ..."
  std::vector<std::string> failures;  // subset of lines that failed
  std::vector<std::filesystem::path> written;
};

ExtractResult run_extract(const PipelineConfig& cfg);
RestoreResult run_restore(const PipelineConfig& cfg);
DatasetSummary run_filter(const PipelineConfig& cfg);
/// Predictions are read from <cfg.input>/<entry id>.png; ground truth is the
/// restored mask of every kept entry.
EvaluateResult run_evaluate(const PipelineConfig& cfg);
LossCheckResult run_losscheck(const PipelineConfig& cfg);
void run_report(const PipelineConfig& cfg);

/// Per-class means over evaluated pairs. ASD and NSD average only the pairs
/// where they are defined.
struct ClassAggregate {
  int pairs = 0;
  double iou = 0, dice = 0, precision = 0, recall = 0, f1 = 0;
  std::optional<double> asd, nsd;
  int asd_pairs = 0, nsd_pairs = 0;
};

struct SeriesAggregate {
  int pairs = 0;
  std::array<ClassAggregate, kNumClasses> per_class;
  double mean_iou = 0;
  double mean_dice = 0;
};

SeriesAggregate aggregate_reports(const std::vector<const MetricReport*>& reports);

/// Table in the column order IoU, Dice, ASD, NSD, Precision, Recall, F1.
std::string format_aggregate_table(const std::map<std::string, SeriesAggregate>& groups);

}  // namespace spinecurate
