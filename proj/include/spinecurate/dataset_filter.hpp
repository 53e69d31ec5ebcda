#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinecurate/image.hpp"
#include "spinecurate/volume_io.hpp"

namespace spinecurate {

struct ClassStats {
  std::array<std::int64_t, kNumClasses> counts{};
  std::int64_t total = 0;

  bool present(ClassId c) const { return counts[c] > 0; }
  int num_present() const;
  bool operator==(const ClassStats&) const = default;
};

struct ClassWeights {
  std::array<double, kNumClasses> weights{};
  bool operator==(const ClassWeights&) const = default;
};

enum class ImbalanceMode { dominant_fraction, max_over_min };

enum class Series { T1, T2, T2_SPACE };

enum class Verdict { pending, kept, dropped_redundant, dropped_imbalanced, failed };

std::string_view to_string(ImbalanceMode m) noexcept;
std::string_view to_string(Series s) noexcept;
std::string_view to_string(Verdict v) noexcept;
// Each throws Error{unsupported_value} on an unknown name.
ImbalanceMode imbalance_mode_from_string(std::string_view s);
Series series_from_string(std::string_view s);
Verdict verdict_from_string(std::string_view s);

struct RestoreStatus {
  bool converged = false;
  int rounds = 0;
  bool operator==(const RestoreStatus&) const = default;
};

/// One (image slice, mask slice) pair in the curation ledger. Paths are
/// relative to the manifest's output root.
struct ManifestEntry {
  std::string id;
  std::string volume;  // source volume stem
  int slice_index = 0;
  Series series = Series::T1;
  SliceSpec slice_spec;
  std::array<double, 2> spacing{1.0, 1.0};  // (row, col)
  std::string image_ref;
  std::string mask_ref;
  std::string restored_ref;
  std::optional<RestoreStatus> restore;
  std::optional<ClassStats> stats;
  std::optional<ClassWeights> weights;
  std::optional<double> imbalance_ratio;
  Verdict verdict = Verdict::pending;
  std::string split;
  std::string error;

  bool operator==(const ManifestEntry&) const = default;
};

/// Exact per-class pixel counts.
ClassStats class_census(const LabelMask& mask);

/// weights[c] = counts[c] / total. Throws Error{empty_mask} when total == 0.
ClassWeights class_weights(const ClassStats& stats);

/// dominant_fraction: the largest weight.
/// max_over_min: largest / smallest; throws Error{zero_weight} if any weight is 0.
double imbalance_ratio(const ClassWeights& weights, ImbalanceMode mode);

inline constexpr double kDefaultImbalanceThreshold = 0.55;

/// Step 1: entries with fewer than four classes become dropped_redundant.
/// Failed entries and entries without stats are left alone.
std::vector<ManifestEntry> filter_redundant(std::vector<ManifestEntry> entries);

/// Step 2: among entries that survived step 1, a ratio strictly above
/// `threshold` drops the entry; everything else becomes kept. Records the
/// ratio on every evaluated entry.
std::vector<ManifestEntry> filter_imbalanced(std::vector<ManifestEntry> entries, double threshold,
                                             ImbalanceMode mode);

/// Both steps from scratch: verdicts of evaluable entries are reset first, so
/// repeated application is idempotent.
std::vector<ManifestEntry> apply_filtration(std::vector<ManifestEntry> entries, double threshold,
                                            ImbalanceMode mode);

struct SeriesSummary {
  int total = 0;
  int kept = 0;
  int dropped_redundant = 0;
  int dropped_imbalanced = 0;
  int failed = 0;
  int pending = 0;
  /// Max ratio over entries that reached step 2, before and after dropping.
  std::optional<double> max_ratio_before;
  std::optional<double> max_ratio_kept;
  std::optional<double> ratio_reduction() const;
  bool operator==(const SeriesSummary&) const = default;
};

struct DatasetSummary {
  ImbalanceMode mode = ImbalanceMode::dominant_fraction;
  double threshold = kDefaultImbalanceThreshold;
  std::map<Series, SeriesSummary> per_series;
  SeriesSummary overall;
  bool operator==(const DatasetSummary&) const = default;
};

DatasetSummary summarize(const std::vector<ManifestEntry>& entries, double threshold,
                         ImbalanceMode mode);

std::string format_summary_table(const DatasetSummary& summary);

namespace serial {
ClassStats class_census(const LabelMask& mask);
}

}  // namespace spinecurate
