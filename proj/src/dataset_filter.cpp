#include "spinecurate/dataset_filter.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

int ClassStats::num_present() const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; }));
}

std::string_view to_string(ImbalanceMode m) noexcept {
  return m == ImbalanceMode::dominant_fraction ? "dominant_fraction" : "max_over_min";
}

std::string_view to_string(Series s) noexcept {
  switch (s) {
    case Series::T1: return "T1";
    case Series::T2: return "T2";
    case Series::T2_SPACE: return "T2_SPACE";
  }
  return "";
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::pending: return "pending";
    case Verdict::kept: return "kept";
    case Verdict::dropped_redundant: return "dropped_redundant";
    case Verdict::dropped_imbalanced: return "dropped_imbalanced";
    case Verdict::failed: return "failed";
  }
  return "";
}

ImbalanceMode imbalance_mode_from_string(std::string_view s) {
  if (s == "dominant_fraction") return ImbalanceMode::dominant_fraction;
  if (s == "max_over_min") return ImbalanceMode::max_over_min;
  throw Error(Errc::unsupported_value, fmt::format("imbalance mode '{}'", s));
}

Series series_from_string(std::string_view s) {
  if (s == "T1") return Series::T1;
  if (s == "T2") return Series::T2;
  if (s == "T2_SPACE") return Series::T2_SPACE;
  throw Error(Errc::unsupported_value, fmt::format("series '{}'", s));
}

Verdict verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::pending, Verdict::kept, Verdict::dropped_redundant,
                 Verdict::dropped_imbalanced, Verdict::failed}) {
    if (s == to_string(v)) return v;
  }
  throw Error(Errc::unsupported_value, fmt::format("verdict '{}'", s));
}

ClassStats class_census(const LabelMask& mask) {
  std::int64_t counts[kNumClasses] = {0, 0, 0, 0};
  const auto n = static_cast<std::int64_t>(mask.labels.size());
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(+ : counts[:kNumClasses]) reduction(|| : bad)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto c = mask.labels[static_cast<std::size_t>(i)];
    if (c < kNumClasses) {
      ++counts[c];
    } else {
      bad = true;
    }
  }
  if (bad) throw Error(Errc::invalid_argument, "label outside {0,1,2,3}");
  ClassStats stats;
  std::copy(std::begin(counts), std::end(counts), stats.counts.begin());
  stats.total = n;
  return stats;
}

ClassWeights class_weights(const ClassStats& stats) {
  if (stats.total <= 0) throw Error(Errc::empty_mask, "mask has no pixels");
  ClassWeights w;
  for (int c = 0; c < kNumClasses; ++c) {
    w.weights[c] = static_cast<double>(stats.counts[c]) / static_cast<double>(stats.total);
  }
  return w;
}

double imbalance_ratio(const ClassWeights& weights, ImbalanceMode mode) {
  const auto [lo, hi] = std::minmax_element(weights.weights.begin(), weights.weights.end());
  if (mode == ImbalanceMode::dominant_fraction) return *hi;
  if (*lo <= 0.0) throw Error(Errc::zero_weight, "max_over_min needs every class present");
  return *hi / *lo;
}

namespace {

bool evaluable(const ManifestEntry& e) {
  return e.verdict != Verdict::failed && e.stats.has_value();
}

ClassWeights weights_of(const ManifestEntry& e) {
  return e.weights ? *e.weights : class_weights(*e.stats);
}

}  // namespace

std::vector<ManifestEntry> filter_redundant(std::vector<ManifestEntry> entries) {
  for (auto& e : entries) {
    if (!evaluable(e)) continue;
    if (e.stats->num_present() < kNumClasses) e.verdict = Verdict::dropped_redundant;
  }
  return entries;
}

std::vector<ManifestEntry> filter_imbalanced(std::vector<ManifestEntry> entries, double threshold,
                                             ImbalanceMode mode) {
  for (auto& e : entries) {
    if (!evaluable(e) || e.verdict == Verdict::dropped_redundant) continue;
    const auto w = weights_of(e);
    e.weights = w;
    e.imbalance_ratio = imbalance_ratio(w, mode);
    e.verdict = *e.imbalance_ratio > threshold ? Verdict::dropped_imbalanced : Verdict::kept;
  }
  return entries;
}

std::vector<ManifestEntry> apply_filtration(std::vector<ManifestEntry> entries, double threshold,
                                            ImbalanceMode mode) {
  for (auto& e : entries) {
    if (!evaluable(e)) continue;
    e.verdict = Verdict::pending;
    e.imbalance_ratio.reset();
  }
  return filter_imbalanced(filter_redundant(std::move(entries)), threshold, mode);
}

std::optional<double> SeriesSummary::ratio_reduction() const {
  if (!max_ratio_before || !max_ratio_kept) return std::nullopt;
  return *max_ratio_before - *max_ratio_kept;
}

namespace {

void tally(SeriesSummary& s, const ManifestEntry& e) {
  ++s.total;
  switch (e.verdict) {
    case Verdict::kept: ++s.kept; break;
    case Verdict::dropped_redundant: ++s.dropped_redundant; break;
    case Verdict::dropped_imbalanced: ++s.dropped_imbalanced; break;
    case Verdict::failed: ++s.failed; break;
    case Verdict::pending: ++s.pending; break;
  }
  if (!e.imbalance_ratio) return;
  const double r = *e.imbalance_ratio;
  if (e.verdict == Verdict::kept || e.verdict == Verdict::dropped_imbalanced) {
    s.max_ratio_before = std::max(s.max_ratio_before.value_or(r), r);
  }
  if (e.verdict == Verdict::kept) s.max_ratio_kept = std::max(s.max_ratio_kept.value_or(r), r);
}

}  // namespace

DatasetSummary summarize(const std::vector<ManifestEntry>& entries, double threshold,
                         ImbalanceMode mode) {
  DatasetSummary summary;
  summary.mode = mode;
  summary.threshold = threshold;
  for (const auto& e : entries) {
    tally(summary.per_series[e.series], e);
    tally(summary.overall, e);
  }
  return summary;
}

std::string format_summary_table(const DatasetSummary& summary) {
  auto pct = [](const std::optional<double>& v, ImbalanceMode mode) -> std::string {
    if (!v) return "-";
    return mode == ImbalanceMode::dominant_fraction ? fmt::format("{:.2f}%", *v * 100.0)
                                                    : fmt::format("{:.4f}", *v);
  };
  std::string out = fmt::format("Imbalance mode: {}, threshold: {}\n", to_string(summary.mode),
                                summary.threshold);
  out += fmt::format("{:<10} {:>7} {:>6} {:>10} {:>11} {:>7} {:>12} {:>12} {:>10}\n", "Series",
                     "Total", "Kept", "Redundant", "Imbalanced", "Failed", "MaxBefore", "MaxKept",
                     "Reduction");
  auto row = [&](std::string_view name, const SeriesSummary& s) {
    out += fmt::format("{:<10} {:>7} {:>6} {:>10} {:>11} {:>7} {:>12} {:>12} {:>10}\n", name,
                       s.total, s.kept, s.dropped_redundant, s.dropped_imbalanced, s.failed,
                       pct(s.max_ratio_before, summary.mode), pct(s.max_ratio_kept, summary.mode),
                       pct(s.ratio_reduction(), summary.mode));
  };
  for (const auto& [series, s] : summary.per_series) row(to_string(series), s);
  row("All", summary.overall);
  return out;
}

namespace serial {

ClassStats class_census(const LabelMask& mask) {
  ClassStats stats;
  for (auto c : mask.labels) {
    if (c >= kNumClasses) throw Error(Errc::invalid_argument, "label outside {0,1,2,3}");
    ++stats.counts[c];
  }
  stats.total = static_cast<std::int64_t>(mask.labels.size());
  return stats;
}

}  // namespace serial

}  // namespace spinecurate
