#pragma once

// Per-class segmentation metrics for a (prediction, ground truth) pair of
// label masks: overlap ratios from one-vs-rest confusion counts, and surface
// distances between boundary point sets.
//
// Zero-denominator policy: a class absent from both masks scores 1 for every
// ratio metric; a class present in exactly one scores 0. Surface metrics with
// an empty surface are undefined rather than 0.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinecurate/image.hpp"

namespace spinecurate {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Spacing {
  double row = 1.0;
  double col = 1.0;
  bool operator==(const Spacing&) const = default;
};

struct SurfacePoint {
  int row = 0;
  int col = 0;
  auto operator<=>(const SurfacePoint&) const = default;
};

struct SurfacePointSet {
  std::vector<SurfacePoint> points;  // row-major order
  Spacing spacing;
  bool empty() const { return points.empty(); }
};

struct MetricConfig {
  double tau = 1.0;
  bool include_background_in_means = true;
  /// Which neighbours decide whether a pixel lies on the surface.
  Neighborhood connectivity{Connectivity::four};
  Spacing spacing;
};

/// All of these throw Error{shape_mismatch} when pred and gt differ in shape.
ConfusionCounts confusion(const LabelMask& pred, const LabelMask& gt, ClassId c);
std::array<ConfusionCounts, kNumClasses> confusion_all(const LabelMask& pred, const LabelMask& gt);

double iou(const ConfusionCounts& k);
double dice(const ConfusionCounts& k);
double precision(const ConfusionCounts& k);
double recall(const ConfusionCounts& k);
/// Evaluated as 2tp / (2tp + fp + fn), algebraically 2PR / (P + R).
double f1(const ConfusionCounts& k);

double iou(const LabelMask& pred, const LabelMask& gt, ClassId c);
double dice(const LabelMask& pred, const LabelMask& gt, ClassId c);
double precision(const LabelMask& pred, const LabelMask& gt, ClassId c);
double recall(const LabelMask& pred, const LabelMask& gt, ClassId c);
double f1(const LabelMask& pred, const LabelMask& gt, ClassId c);
double mean_iou(const LabelMask& pred, const LabelMask& gt, const MetricConfig& cfg);

/// Pixels of class c with a neighbour (or an out-of-bounds side) not of class c.
SurfacePointSet extract_surface(const LabelMask& mask, ClassId c, const MetricConfig& cfg);

/// For every point of `from`, the Euclidean distance to the nearest point of
/// `to`, with from.spacing applied per axis. `to` must be non-empty.
std::vector<double> nearest_distances(const SurfacePointSet& from, const SurfacePointSet& to);

/// Symmetric average surface distance. Throws Error{empty_surface} if either
/// surface is empty.
double asd(const LabelMask& pred, const LabelMask& gt, ClassId c, const MetricConfig& cfg);

/// Fraction of ground-truth surface points strictly closer than tau to the
/// predicted surface. Throws Error{empty_surface} if the ground-truth surface
/// is empty; an empty predicted surface scores 0.
double nsd(const LabelMask& pred, const LabelMask& gt, ClassId c, const MetricConfig& cfg);

struct ClassMetrics {
  ConfusionCounts counts;
  double iou = 0, dice = 0, precision = 0, recall = 0, f1 = 0;
  std::optional<double> asd, nsd;
};

struct MetricReport {
  std::array<ClassMetrics, kNumClasses> per_class;
  double mean_iou = 0;
  double mean_dice = 0;
};

MetricReport evaluate_pair(const LabelMask& pred, const LabelMask& gt, const MetricConfig& cfg);

std::string_view class_name(ClassId c) noexcept;

/// One JSON object per class: {"class", "iou", "dice", "asd", "nsd",
/// "precision", "recall", "f1", "tp", "fp", "fn", "tn"}; undefined values are null.
nlohmann::json to_json(const ClassMetrics& m, ClassId c);

namespace serial {
std::vector<double> nearest_distances(const SurfacePointSet& from, const SurfacePointSet& to);
}

}  // namespace spinecurate
