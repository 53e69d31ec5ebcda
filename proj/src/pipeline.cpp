#include "spinecurate/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "spinecurate/error.hpp"
#include "spinecurate/manifest.hpp"
#include "spinecurate/png_io.hpp"
#include "spinecurate/volume_io.hpp"

namespace fs = std::filesystem;

namespace spinecurate {

fs::path PipelineConfig::manifest_path() const {
  return manifest.empty() ? output / "manifest.jsonl" : manifest;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::string& single(const std::string& key, const std::vector<std::string>& v) {
  if (v.size() != 1) throw Error(Errc::invalid_argument, fmt::format("{} takes one value", key));
  return v[0];
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::invalid_argument, fmt::format("{}: '{}' is not a number", key, s));
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error(Errc::invalid_argument, fmt::format("{}: '{}' is not true or false", key, s));
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "run.input",          "run.output",          "run.manifest",       "run.overrides",
      "run.verify",         "run.workers",         "run.force",          "palette.dark",
      "palette.mid",        "palette.light",       "palette.green_is_ivd", "restore.connectivity",
      "restore.max_rounds", "filter.threshold",    "filter.imbalance_mode", "metrics.tau",
      "metrics.include_background", "metrics.spacing", "metrics.surface_connectivity",
      "loss.preset",        "loss.gamma",          "loss.alpha_mix",     "loss.alpha_class",
      "loss.epsilon",       "loss.prob_floor",     "loss.dice_mode",     "loss.seed",
      "loss.count"};
  return keys;
}

PipelineConfig pipeline_config_from(const KeyValues& kv) {
  const auto& known = config_keys();
  for (const auto& [key, _] : kv) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::unsupported_value, fmt::format("unknown configuration key '{}'", key));
    }
  }
  PipelineConfig cfg;
  auto get = [&](const char* key) -> const std::vector<std::string>* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (auto v = get(key)) return single(key, *v);
    return std::nullopt;
  };
  auto num = [&]<typename T>(const char* key, T& out) {
    if (auto s = str(key)) out = parse_number<T>(key, *s);
  };
  auto flag = [&](const char* key, bool& out) {
    if (auto s = str(key)) out = parse_bool(key, *s);
  };

  if (auto s = str("run.input")) cfg.input = *s;
  if (auto s = str("run.output")) cfg.output = *s;
  if (auto s = str("run.manifest")) cfg.manifest = *s;
  if (auto s = str("run.overrides")) cfg.overrides = *s;
  if (auto s = str("run.verify")) cfg.verify = *s;
  num("run.workers", cfg.workers);
  flag("run.force", cfg.force);
  if (cfg.workers < 0) throw Error(Errc::invalid_argument, "run.workers must be >= 0");

  cfg.palette = palette_from(kv);
  if (auto s = str("restore.connectivity")) {
    cfg.neighborhood.connectivity = connectivity_from_string(*s);
  }
  num("restore.max_rounds", cfg.max_rounds);
  if (cfg.max_rounds < 1) throw Error(Errc::invalid_argument, "restore.max_rounds must be >= 1");

  num("filter.threshold", cfg.threshold);
  if (auto s = str("filter.imbalance_mode")) cfg.imbalance_mode = imbalance_mode_from_string(*s);
  if (!(cfg.threshold > 0.0)) throw Error(Errc::invalid_argument, "filter.threshold must be > 0");

  num("metrics.tau", cfg.metrics.tau);
  if (!(cfg.metrics.tau > 0.0)) throw Error(Errc::invalid_argument, "metrics.tau must be > 0");
  flag("metrics.include_background", cfg.metrics.include_background_in_means);
  if (auto s = str("metrics.spacing")) {
    if (*s == "pixel") {
      cfg.spacing_source = SpacingSource::pixel;
    } else if (*s == "header") {
      cfg.spacing_source = SpacingSource::header;
    } else {
      throw Error(Errc::unsupported_value, fmt::format("metrics.spacing '{}'", *s));
    }
  }
  if (auto s = str("metrics.surface_connectivity")) {
    cfg.metrics.connectivity.connectivity = connectivity_from_string(*s);
  }

  if (auto s = str("loss.preset")) {
    if (*s == "low_gamma") {
      cfg.loss = LossParams::low_gamma_preset();
    } else if (*s != "default") {
      throw Error(Errc::unsupported_value, fmt::format("loss.preset '{}'", *s));
    }
  }
  num("loss.gamma", cfg.loss.gamma);
  num("loss.alpha_mix", cfg.loss.alpha_mix);
  if (auto v = get("loss.alpha_class")) {
    if (v->size() != kChannels) throw Error(Errc::invalid_argument, "loss.alpha_class takes 4 values");
    for (int c = 0; c < kChannels; ++c) cfg.loss.alpha_class[c] = parse_number<double>("loss.alpha_class", (*v)[c]);
  }
  num("loss.epsilon", cfg.loss.epsilon);
  num("loss.prob_floor", cfg.loss.prob_floor);
  if (auto s = str("loss.dice_mode")) {
    if (*s == "global") {
      cfg.loss.dice_mode = DiceMode::global;
    } else if (*s == "per_class_mean") {
      cfg.loss.dice_mode = DiceMode::per_class_mean;
    } else {
      throw Error(Errc::unsupported_value, fmt::format("loss.dice_mode '{}'", *s));
    }
  }
  cfg.loss.validate();
  num("loss.seed", cfg.loss_seed);
  num("loss.count", cfg.loss_count);
  if (cfg.loss_count < 1) throw Error(Errc::invalid_argument, "loss.count must be >= 1");
  return cfg;
}

Series series_from_stem(const std::string& stem) {
  const auto pos = stem.find('_');
  if (pos != std::string::npos) {
    std::string suffix = stem.substr(pos + 1);
    std::string lower = suffix;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "t1") return Series::T1;
    if (lower == "t2") return Series::T2;
    if (lower == "t2_space") return Series::T2_SPACE;
  }
  throw Error(Errc::unsupported_value, fmt::format("no series suffix in volume name '{}'", stem));
}

std::map<std::string, SliceSpec> parse_slice_overrides(const KeyValues& kv) {
  std::map<std::string, SliceSpec> out;
  for (const auto& [full, values] : kv) {
    const auto dot = full.rfind('.');
    if (dot == std::string::npos) {
      throw Error(Errc::invalid_argument, fmt::format("override '{}' has no volume section", full));
    }
    const std::string stem = full.substr(0, dot);
    const std::string key = full.substr(dot + 1);
    const std::string& v = single(full, values);
    SliceSpec& spec = out[stem];
    if (key == "axis") {
      if (v == "sagittal_default" || v == "sagittal") {
        spec.axis = SliceAxis::sagittal_default;
      } else if (v == "axial_override" || v == "axial") {
        spec.axis = SliceAxis::axial_override;
      } else {
        throw Error(Errc::unsupported_value, fmt::format("{}: axis '{}'", full, v));
      }
    } else if (key == "rotate") {
      spec.rotate_quarter_turns = parse_number<int>(full, v);
    } else if (key == "flip_h") {
      spec.flip_horizontal = parse_bool(full, v);
    } else if (key == "flip_v") {
      spec.flip_vertical = parse_bool(full, v);
    } else {
      throw Error(Errc::unsupported_value, fmt::format("unknown override key '{}'", full));
    }
  }
  for (const auto& [stem, spec] : out) spec.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

std::string describe(const std::exception& ex) {
  if (const auto* e = dynamic_cast<const Error*>(&ex)) {
    return fmt::format("{}: {}", to_string(e->code()), e->what());
  }
  return fmt::format("{}: {}", to_string(Errc::io), ex.what());
}

void require_output(const PipelineConfig& cfg) {
  if (cfg.output.empty()) throw Error(Errc::invalid_argument, "no output directory given");
}

std::vector<ManifestEntry> require_manifest(const PipelineConfig& cfg, std::string_view stage) {
  require_output(cfg);
  const auto path = cfg.manifest_path();
  if (!fs::exists(path)) {
    throw Error(Errc::out_of_order,
                fmt::format("no manifest at {}; run {} first", path.string(), stage));
  }
  return load_manifest(path);
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, fmt::format("cannot create {}", path.string()));
  out << text;
  if (!out) throw Error(Errc::io, fmt::format("write failed for {}", path.string()));
}

std::string dump_lines(const std::vector<nlohmann::json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::string> mha_stems(const fs::path& dir) {
  std::vector<std::string> stems;
  if (!fs::is_directory(dir)) return stems;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".mha") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::vector<ManifestEntry> extract_volume(const PipelineConfig& cfg, const std::string& stem,
                                          const SliceSpec& spec) {
  const Series series = series_from_stem(stem);
  const fs::path mask_path = cfg.input / "masks" / (stem + ".mha");
  if (!fs::exists(mask_path)) {
    throw Error(Errc::io, fmt::format("no mask volume {}", mask_path.string()));
  }
  const Volume image = read_volume_file(cfg.input / "images" / (stem + ".mha"));
  const Volume mask = read_volume_file(mask_path);
  if (image.header.dim_size != mask.header.dim_size) {
    throw Error(Errc::shape_mismatch, fmt::format("image and mask of {} differ in size", stem));
  }
  const auto image_slices = extract_slices(image, spec, SliceMode::image);
  const auto mask_slices = extract_slices(mask, spec, SliceMode::mask);
  const auto spacing = slice_spacing(mask.header, spec);

  std::vector<ManifestEntry> entries;
  for (std::size_t k = 0; k < image_slices.size(); ++k) {
    ManifestEntry e;
    e.id = fmt::format("{}_s{:03d}", stem, k);
    e.volume = stem;
    e.slice_index = static_cast<int>(k);
    e.series = series;
    e.slice_spec = spec;
    e.spacing = spacing;
    e.image_ref = fmt::format("images/{}.png", e.id);
    e.mask_ref = fmt::format("masks/{}.png", e.id);
    write_png(cfg.output / e.image_ref, image_slices[k]);
    write_png(cfg.output / e.mask_ref, mask_slices[k]);
    entries.push_back(std::move(e));
  }
  return entries;
}

ManifestEntry failed_volume(const std::string& stem, const SliceSpec& spec, std::string error) {
  ManifestEntry e;
  e.id = stem;
  e.volume = stem;
  e.slice_index = -1;
  try {
    e.series = series_from_stem(stem);
  } catch (const Error&) {
  }
  e.slice_spec = spec;
  e.verdict = Verdict::failed;
  e.error = std::move(error);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// extract

ExtractResult run_extract(const PipelineConfig& cfg) {
  require_output(cfg);
  if (!fs::is_directory(cfg.input / "images")) {
    throw Error(Errc::io, fmt::format("{} has no images/ directory", cfg.input.string()));
  }
  if (fs::exists(cfg.output) && fs::equivalent(cfg.input, cfg.output)) {
    throw Error(Errc::invalid_argument, "output directory must differ from the input directory");
  }
  const auto manifest_path = cfg.manifest_path();
  if (fs::exists(manifest_path) && !cfg.force) {
    throw Error(Errc::out_of_order,
                fmt::format("{} already exists; pass --force to extract again", manifest_path.string()));
  }
  std::map<std::string, SliceSpec> overrides;
  const fs::path overrides_path =
      cfg.overrides.empty() ? cfg.input / "overrides.ini" : cfg.overrides;
  if (fs::exists(overrides_path)) {
    overrides = parse_slice_overrides(load_key_values(overrides_path));
  } else if (!cfg.overrides.empty()) {
    throw Error(Errc::io, fmt::format("no override file {}", overrides_path.string()));
  }

  const auto stems = mha_stems(cfg.input / "images");
  if (stems.empty()) {
    throw Error(Errc::invalid_argument, fmt::format("no .mha volumes in {}", (cfg.input / "images").string()));
  }
  fs::create_directories(cfg.output / "images");
  fs::create_directories(cfg.output / "masks");

  const int n = static_cast<int>(stems.size());
  std::vector<std::vector<ManifestEntry>> per_volume(stems.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& stem = stems[i];
    const auto it = overrides.find(stem);
    const SliceSpec spec = it == overrides.end() ? SliceSpec{} : it->second;
    try {
      per_volume[i] = extract_volume(cfg, stem, spec);
    } catch (const std::exception& ex) {
      per_volume[i] = {failed_volume(stem, spec, describe(ex))};
    }
  }

  ExtractResult result;
  result.volumes = n;
  std::vector<ManifestEntry> entries;
  for (auto& v : per_volume) {
    for (auto& e : v) {
      if (e.verdict == Verdict::failed) ++result.failed;
      entries.push_back(std::move(e));
    }
  }
  result.entries = static_cast<int>(entries.size());
  save_manifest(manifest_path, entries);
  return result;
}

// ---------------------------------------------------------------------------
// restore

namespace {

struct Restored {
  bool attempted = false;
  Raster2D raster;
  ClassStats stats;
  ClassWeights weights;
  RestoreStatus status;
  std::string error;
};

}  // namespace

RestoreResult run_restore(const PipelineConfig& cfg) {
  auto entries = require_manifest(cfg, "extract");
  cfg.palette.validate();
  for (const auto& e : entries) {
    if (e.mask_ref.empty() && e.verdict != Verdict::failed) {
      throw Error(Errc::out_of_order, fmt::format("entry {} has no mask reference", e.id));
    }
  }

  const int n = static_cast<int>(entries.size());
  std::vector<Restored> work(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& e = entries[i];
    if (e.mask_ref.empty()) continue;
    auto& w = work[i];
    w.attempted = true;
    try {
      const auto result = apta(rgb_from_raster(read_png(cfg.output / e.mask_ref)), cfg.palette,
                               cfg.neighborhood, cfg.max_rounds);
      w.raster = encode_label_raster(result.labels);
      w.stats = class_census(result.labels);
      w.weights = class_weights(w.stats);
      w.status = {result.converged, result.rounds};
    } catch (const std::exception& ex) {
      w.error = describe(ex);
    }
  }

  // Entries that already carry a verdict must not change silently.
  if (!cfg.force) {
    for (int i = 0; i < n; ++i) {
      const auto& e = entries[i];
      const auto& w = work[i];
      if (!w.attempted || e.verdict == Verdict::pending) continue;
      const bool now_failed = !w.error.empty();
      const bool was_failed = e.verdict == Verdict::failed;
      if (now_failed != was_failed || (!now_failed && e.stats != w.stats)) {
        throw Error(Errc::invalid_argument,
                    fmt::format("restoring {} would change its recorded {} verdict; pass --force",
                                e.id, to_string(e.verdict)));
      }
    }
  }

  fs::create_directories(cfg.output / "restored");
  RestoreResult result;
  for (int i = 0; i < n; ++i) {
    auto& e = entries[i];
    auto& w = work[i];
    if (!w.attempted) {
      ++result.failed;
      continue;
    }
    if (!w.error.empty()) {
      e.verdict = Verdict::failed;
      e.error = w.error;
      e.restored_ref.clear();
      e.restore.reset();
      e.stats.reset();
      e.weights.reset();
      e.imbalance_ratio.reset();
      ++result.failed;
      continue;
    }
    e.restored_ref = fmt::format("restored/{}.png", e.id);
    write_png(cfg.output / e.restored_ref, w.raster);
    if (e.stats != w.stats || e.verdict == Verdict::failed) {
      e.verdict = Verdict::pending;
      e.imbalance_ratio.reset();
    }
    e.error.clear();
    e.restore = w.status;
    e.stats = w.stats;
    e.weights = w.weights;
    ++result.restored;
    if (!w.status.converged) ++result.not_converged;
  }
  save_manifest(cfg.manifest_path(), entries);
  return result;
}

// ---------------------------------------------------------------------------
// filter

DatasetSummary run_filter(const PipelineConfig& cfg) {
  auto entries = require_manifest(cfg, "extract");
  for (const auto& e : entries) {
    if (e.verdict != Verdict::failed && !e.stats) {
      throw Error(Errc::out_of_order, fmt::format("entry {} has no class census; run restore first", e.id));
    }
  }
  auto filtered = apply_filtration(entries, cfg.threshold, cfg.imbalance_mode);
  if (!cfg.force) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto before = entries[i].verdict;
      if (before != Verdict::pending && before != filtered[i].verdict) {
        throw Error(Errc::invalid_argument,
                    fmt::format("entry {} would change from {} to {}; pass --force", entries[i].id,
                                to_string(before), to_string(filtered[i].verdict)));
      }
    }
  }
  const auto summary = summarize(filtered, cfg.threshold, cfg.imbalance_mode);
  save_manifest(cfg.manifest_path(), filtered);
  write_text(cfg.output / "summary.json", to_json(summary).dump(2) + "\n");
  write_text(cfg.output / "summary.txt", format_summary_table(summary));
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

SeriesAggregate aggregate_reports(const std::vector<const MetricReport*>& reports) {
  SeriesAggregate agg;
  agg.pairs = static_cast<int>(reports.size());
  if (reports.empty()) return agg;
  const double n = static_cast<double>(reports.size());
  for (int c = 0; c < kNumClasses; ++c) {
    auto& a = agg.per_class[c];
    a.pairs = agg.pairs;
    double asd_sum = 0, nsd_sum = 0;
    for (const auto* r : reports) {
      const auto& m = r->per_class[c];
      a.iou += m.iou;
      a.dice += m.dice;
      a.precision += m.precision;
      a.recall += m.recall;
      a.f1 += m.f1;
      if (m.asd) {
        asd_sum += *m.asd;
        ++a.asd_pairs;
      }
      if (m.nsd) {
        nsd_sum += *m.nsd;
        ++a.nsd_pairs;
      }
    }
    a.iou /= n;
    a.dice /= n;
    a.precision /= n;
    a.recall /= n;
    a.f1 /= n;
    if (a.asd_pairs > 0) a.asd = asd_sum / a.asd_pairs;
    if (a.nsd_pairs > 0) a.nsd = nsd_sum / a.nsd_pairs;
  }
  for (const auto* r : reports) {
    agg.mean_iou += r->mean_iou;
    agg.mean_dice += r->mean_dice;
  }
  agg.mean_iou /= n;
  agg.mean_dice /= n;
  return agg;
}

namespace {

nlohmann::json aggregate_json(const SeriesAggregate& agg) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json classes = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& a = agg.per_class[c];
    classes[std::string(class_name(static_cast<ClassId>(c)))] = {
        {"iou", a.iou},       {"dice", a.dice},     {"asd", opt(a.asd)},
        {"nsd", opt(a.nsd)},  {"precision", a.precision}, {"recall", a.recall},
        {"f1", a.f1},         {"asd_pairs", a.asd_pairs}, {"nsd_pairs", a.nsd_pairs}};
  }
  return {{"pairs", agg.pairs}, {"mean_iou", agg.mean_iou}, {"mean_dice", agg.mean_dice},
          {"classes", classes}};
}

}  // namespace

std::string format_aggregate_table(const std::map<std::string, SeriesAggregate>& groups) {
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("-");
  };
  std::string out = fmt::format("{:<10} {:<13} {:>6} {:>8} {:>8} {:>8} {:>8} {:>9} {:>8} {:>8}\n",
                                "Series", "Class", "Pairs", "IoU", "Dice", "ASD", "NSD", "Precision",
                                "Recall", "F1");
  std::vector<const std::pair<const std::string, SeriesAggregate>*> order;
  for (const auto& g : groups) {
    if (g.first != "All") order.push_back(&g);
  }
  if (auto it = groups.find("All"); it != groups.end()) order.push_back(&*it);
  for (const auto* g : order) {
    const auto& [name, agg] = *g;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& a = agg.per_class[c];
      out += fmt::format("{:<10} {:<13} {:>6} {:>8.4f} {:>8.4f} {:>8} {:>8} {:>9.4f} {:>8.4f} {:>8.4f}\n",
                         name, class_name(static_cast<ClassId>(c)), a.pairs, a.iou, a.dice,
                         cell(a.asd), cell(a.nsd), a.precision, a.recall, a.f1);
    }
    out += fmt::format("{:<10} {:<13} {:>6} mean IoU {:.4f}, mean Dice {:.4f}\n", name, "mean",
                       agg.pairs, agg.mean_iou, agg.mean_dice);
  }
  return out;
}

EvaluateResult run_evaluate(const PipelineConfig& cfg) {
  const auto entries = require_manifest(cfg, "extract");
  const bool filtered = std::any_of(entries.begin(), entries.end(), [](const ManifestEntry& e) {
    return e.verdict != Verdict::pending && e.verdict != Verdict::failed;
  });
  if (!filtered) throw Error(Errc::out_of_order, "no entry has a verdict; run filter first");
  if (cfg.input.empty()) throw Error(Errc::invalid_argument, "no prediction directory given");
  if (!fs::is_directory(cfg.input)) {
    throw Error(Errc::io, fmt::format("prediction directory {} not found", cfg.input.string()));
  }

  std::vector<const ManifestEntry*> kept;
  for (const auto& e : entries) {
    if (e.verdict == Verdict::kept) kept.push_back(&e);
  }
  const int n = static_cast<int>(kept.size());
  std::vector<std::optional<MetricReport>> reports(kept.size());
  std::vector<std::string> errors(kept.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const auto& e = *kept[i];
    try {
      const auto gt = decode_label_raster(read_png(cfg.output / e.restored_ref));
      const fs::path pred_path = cfg.input / (e.id + ".png");
      if (!fs::exists(pred_path)) throw Error(Errc::io, fmt::format("no prediction {}", pred_path.string()));
      const auto pred = decode_label_raster(read_png(pred_path));
      MetricConfig mc = cfg.metrics;
      if (cfg.spacing_source == SpacingSource::header) mc.spacing = {e.spacing[0], e.spacing[1]};
      reports[i] = evaluate_pair(pred, gt, mc);
    } catch (const std::exception& ex) {
      errors[i] = describe(ex);
    }
  }

  EvaluateResult result;
  std::vector<nlohmann::json> pair_records, skipped_records;
  std::map<std::string, std::vector<const MetricReport*>> groups;
  for (int i = 0; i < n; ++i) {
    const auto& e = *kept[i];
    if (!reports[i]) {
      skipped_records.push_back({{"id", e.id}, {"error", errors[i]}});
      ++result.skipped;
      continue;
    }
    ++result.evaluated;
    for (int c = 0; c < kNumClasses; ++c) {
      auto rec = to_json(reports[i]->per_class[c], static_cast<ClassId>(c));
      rec["id"] = e.id;
      rec["series"] = to_string(e.series);
      pair_records.push_back(std::move(rec));
    }
    groups[std::string(to_string(e.series))].push_back(&*reports[i]);
    groups["All"].push_back(&*reports[i]);
  }

  std::map<std::string, SeriesAggregate> aggregates;
  nlohmann::json agg_json = nlohmann::json::object();
  for (const auto& [name, list] : groups) {
    aggregates[name] = aggregate_reports(list);
    agg_json[name] = aggregate_json(aggregates[name]);
  }
  const fs::path dir = cfg.output / "evaluation";
  write_text(dir / "pairs.jsonl", dump_lines(pair_records));
  write_text(dir / "skipped.jsonl", dump_lines(skipped_records));
  write_text(dir / "aggregate.json", agg_json.dump(2) + "\n");
  write_text(dir / "aggregate.txt", format_aggregate_table(aggregates));
  return result;
}

// ---------------------------------------------------------------------------
// loss-check

namespace {

// Relative error of two gradient vectors in the 2-norm.
double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

double cross_entropy(const ProbTensor& pred, const OneHotTensor& target, double floor) {
  double sum = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (target.values[i] == 1.0) sum -= std::log(std::max(pred.values[i], floor));
  }
  return sum / static_cast<double>(pred.pixels());
}

}  // namespace

LossCheckResult run_losscheck(const PipelineConfig& cfg) {
  cfg.loss.validate();
  LossCheckResult result;
  auto check = [&](bool ok, std::string text) {
    auto line = fmt::format("{} {}", ok ? "PASS" : "FAIL", text);
    if (!ok) result.failures.push_back(line);
    result.lines.push_back(std::move(line));
  };

  if (!cfg.verify.empty()) {
    std::ifstream in(cfg.verify, std::ios::binary);
    if (!in) throw Error(Errc::io, fmt::format("cannot open {}", cfg.verify.string()));
    const auto vectors = read_test_vectors(in);
    const auto mismatches = verify_test_vectors(vectors, 1e-10);
    for (const auto& m : mismatches) {
      check(false, fmt::format("vector {} field {}: stored {:.17g}, recomputed {:.17g}", m.id,
                               m.field, m.stored, m.recomputed));
    }
    check(mismatches.empty(),
          fmt::format("{} vectors verified, {} mismatches", vectors.size(), mismatches.size()));
    return result;
  }
  require_output(cfg);

  {
    // One pixel, true-class probability 1/2.
    ProbTensor pred{1, 1, {0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3}};
    OneHotTensor target{1, 1, {1.0, 0.0, 0.0, 0.0}};
    LossParams p;
    p.gamma = 4.0;
    p.alpha_class = {0.6, 0.6, 0.6, 0.6};
    const double focal = focal_loss(pred, target, p);
    check(std::abs(focal - 0.0259930) <= 1e-6,
          fmt::format("focal closed form: {:.10f} vs 0.0259930 (tol 1e-6)", focal));
  }
  {
    LossParams p;
    p.gamma = 0.0;
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      const auto seed = cfg.loss_seed * 100 + static_cast<std::uint64_t>(k);
      const auto pred = random_prob_tensor(seed * 2 + 1, 4, 4);
      const auto target = random_one_hot(seed * 2 + 2, 4, 4);
      worst = std::max(worst, std::abs(focal_loss(pred, target, p) - cross_entropy(pred, target, p.prob_floor)));
    }
    check(worst <= 1e-12, fmt::format("gamma 0 focal vs cross-entropy: max diff {:.3e} (tol 1e-12)", worst));
  }
  {
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      const auto seed = cfg.loss_seed * 200 + static_cast<std::uint64_t>(k);
      const auto pred = random_prob_tensor(seed * 2 + 1, 4, 4);
      const auto target = random_one_hot(seed * 2 + 2, 4, 4);
      for (double mix : {0.0, 0.25, 0.6, 1.0}) {
        LossParams p = cfg.loss;
        p.alpha_mix = mix;
        const double lhs = combined_loss(pred, target, p);
        const double rhs = mix * focal_loss(pred, target, p) + (1.0 - mix) * dice_loss(pred, target, p);
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
    check(worst <= 1e-12, fmt::format("combined linearity in alpha_mix: max diff {:.3e} (tol 1e-12)", worst));
  }
  for (LossKind kind : {LossKind::focal, LossKind::dice, LossKind::combined}) {
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const auto seed = cfg.loss_seed * 300 + static_cast<std::uint64_t>(k);
      const auto pred = random_prob_tensor(seed * 2 + 1, 4, 4);
      const auto target = random_one_hot(seed * 2 + 2, 4, 4);
      const auto analytic = loss_gradient(kind, pred, target, cfg.loss);
      const auto numeric = finite_diff_grad(kind, pred, target, cfg.loss, 1e-6);
      worst = std::max(worst, relative_error(analytic, numeric));
    }
    check(worst < 1e-5, fmt::format("{} gradient vs central differences: max relative error {:.3e} (tol 1e-5)",
                                    to_string(kind), worst));
  }

  struct Set {
    const char* file;
    double mix;
  };
  for (const Set set : {Set{"loss_vectors.jsonl", cfg.loss.alpha_mix},
                        Set{"loss_vectors_alpha_mix_0.jsonl", 0.0},
                        Set{"loss_vectors_alpha_mix_1.jsonl", 1.0}}) {
    LossParams p = cfg.loss;
    p.alpha_mix = set.mix;
    const auto vectors = make_test_vectors(cfg.loss_seed, cfg.loss_count, p);
    std::ostringstream out;
    write_test_vectors(out, vectors);
    const fs::path path = cfg.output / set.file;
    write_text(path, out.str());
    result.written.push_back(path);
    std::istringstream in(out.str());
    const auto mismatches = verify_test_vectors(read_test_vectors(in), 0.0);
    check(mismatches.empty(), fmt::format("{}: {} vectors round-trip exactly", set.file, vectors.size()));
  }
  std::string text;
  for (const auto& line : result.lines) text += line + "\n";
  write_text(cfg.output / "loss_check.txt", text);
  return result;
}

// ---------------------------------------------------------------------------
// report

void run_report(const PipelineConfig& cfg) {
  const auto entries = require_manifest(cfg, "extract");
  int restored = 0, not_converged = 0, max_rounds = 0;
  for (const auto& e : entries) {
    if (!e.restore) continue;
    ++restored;
    if (!e.restore->converged) ++not_converged;
    max_rounds = std::max(max_rounds, e.restore->rounds);
  }
  std::string out = "Curation report\n\n";
  out += fmt::format("Manifest entries: {}\n", entries.size());
  out += fmt::format("Restored masks: {} ({} did not converge, at most {} rounds)\n\n", restored,
                     not_converged, max_rounds);
  out += "Filtration\n";
  out += format_summary_table(summarize(entries, cfg.threshold, cfg.imbalance_mode));
  std::vector<std::string> failed;
  for (const auto& e : entries) {
    if (e.verdict == Verdict::failed) failed.push_back(fmt::format("  {}: {}", e.id, e.error));
  }
  if (!failed.empty()) {
    out += "\nFailed entries\n";
    for (const auto& f : failed) out += f + "\n";
  }
  const fs::path aggregate = cfg.output / "evaluation" / "aggregate.txt";
  if (fs::exists(aggregate)) {
    std::ifstream in(aggregate, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out += "\nEvaluation (unweighted means over kept pairs)\n" + ss.str();
    std::ifstream skipped(cfg.output / "evaluation" / "skipped.jsonl", std::ios::binary);
    int lines = 0;
    for (std::string line; std::getline(skipped, line);) lines += !line.empty();
    out += fmt::format("Skipped pairs: {}\n", lines);
  }
  write_text(cfg.output / "report.txt", out);
}

}  // namespace spinecurate
