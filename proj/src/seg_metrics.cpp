#include "spinecurate/seg_metrics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

namespace {

void require_same_shape(const LabelMask& pred, const LabelMask& gt) {
  if (!pred.same_shape(gt)) {
    throw Error(Errc::shape_mismatch, fmt::format("prediction {}x{} vs ground truth {}x{}",
                                                  pred.width, pred.height, gt.width, gt.height));
  }
}

double sum_in_order(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace

std::array<ConfusionCounts, kNumClasses> confusion_all(const LabelMask& pred, const LabelMask& gt) {
  require_same_shape(pred, gt);
  std::int64_t pred_n[kNumClasses] = {0, 0, 0, 0};
  std::int64_t gt_n[kNumClasses] = {0, 0, 0, 0};
  std::int64_t hit[kNumClasses] = {0, 0, 0, 0};
  const auto n = static_cast<std::int64_t>(pred.labels.size());
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(+ : pred_n[:kNumClasses], gt_n[:kNumClasses], hit[:kNumClasses]) reduction(|| : bad)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto p = pred.labels[static_cast<std::size_t>(i)];
    const auto g = gt.labels[static_cast<std::size_t>(i)];
    if (p >= kNumClasses || g >= kNumClasses) {
      bad = true;
      continue;
    }
    ++pred_n[p];
    ++gt_n[g];
    if (p == g) ++hit[p];
  }
  if (bad) throw Error(Errc::invalid_argument, "label outside {0,1,2,3}");
  std::array<ConfusionCounts, kNumClasses> out;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& k = out[c];
    k.tp = hit[c];
    k.fp = pred_n[c] - hit[c];
    k.fn = gt_n[c] - hit[c];
    k.tn = n - k.tp - k.fp - k.fn;
  }
  return out;
}

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& gt, ClassId c) {
  if (c >= kNumClasses) throw Error(Errc::invalid_argument, fmt::format("class {}", int(c)));
  return confusion_all(pred, gt)[c];
}

double iou(const ConfusionCounts& k) {
  const auto denom = k.tp + k.fp + k.fn;
  return denom == 0 ? 1.0 : static_cast<double>(k.tp) / static_cast<double>(denom);
}

double dice(const ConfusionCounts& k) {
  const auto denom = 2 * k.tp + k.fp + k.fn;
  return denom == 0 ? 1.0 : static_cast<double>(2 * k.tp) / static_cast<double>(denom);
}

double precision(const ConfusionCounts& k) {
  const auto denom = k.tp + k.fp;
  if (denom == 0) return k.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(k.tp) / static_cast<double>(denom);
}

double recall(const ConfusionCounts& k) {
  const auto denom = k.tp + k.fn;
  if (denom == 0) return k.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(k.tp) / static_cast<double>(denom);
}

double f1(const ConfusionCounts& k) { return dice(k); }

double iou(const LabelMask& pred, const LabelMask& gt, ClassId c) { return iou(confusion(pred, gt, c)); }
double dice(const LabelMask& pred, const LabelMask& gt, ClassId c) {
  return dice(confusion(pred, gt, c));
}
double precision(const LabelMask& pred, const LabelMask& gt, ClassId c) {
  return precision(confusion(pred, gt, c));
}
double recall(const LabelMask& pred, const LabelMask& gt, ClassId c) {
  return recall(confusion(pred, gt, c));
}
double f1(const LabelMask& pred, const LabelMask& gt, ClassId c) { return f1(confusion(pred, gt, c)); }

double mean_iou(const LabelMask& pred, const LabelMask& gt, const MetricConfig& cfg) {
  const auto all = confusion_all(pred, gt);
  const int first = cfg.include_background_in_means ? 0 : 1;
  double s = 0.0;
  for (int c = first; c < kNumClasses; ++c) s += iou(all[c]);
  return s / (kNumClasses - first);
}

SurfacePointSet extract_surface(const LabelMask& mask, ClassId c, const MetricConfig& cfg) {
  SurfacePointSet out;
  out.spacing = cfg.spacing;
  const int n = neighbor_count(cfg.connectivity.connectivity);
  for (int r = 0; r < mask.height; ++r) {
    for (int col = 0; col < mask.width; ++col) {
      if (mask.at(r, col) != c) continue;
      bool boundary = false;
      for (int k = 0; k < n && !boundary; ++k) {
        const int rr = r + kNeighborOffsets[k][0];
        const int cc = col + kNeighborOffsets[k][1];
        boundary = rr < 0 || rr >= mask.height || cc < 0 || cc >= mask.width || mask.at(rr, cc) != c;
      }
      if (boundary) out.points.push_back({r, col});
    }
  }
  return out;
}

std::vector<double> nearest_distances(const SurfacePointSet& from, const SurfacePointSet& to) {
  if (to.empty()) throw Error(Errc::empty_surface, "target surface is empty");
  const auto n = static_cast<std::int64_t>(from.points.size());
  const double sr = from.spacing.row;
  const double sc = from.spacing.col;
  std::vector<double> out(from.points.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = from.points[static_cast<std::size_t>(i)];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points) {
      const double dr = (p.row - q.row) * sr;
      const double dc = (p.col - q.col) * sc;
      best = std::min(best, dr * dr + dc * dc);
    }
    out[static_cast<std::size_t>(i)] = std::sqrt(best);
  }
  return out;
}

namespace {

std::optional<double> asd_of(const SurfacePointSet& sp, const SurfacePointSet& sg) {
  if (sp.empty() || sg.empty()) return std::nullopt;
  const double total = sum_in_order(nearest_distances(sp, sg)) + sum_in_order(nearest_distances(sg, sp));
  return total / static_cast<double>(sp.points.size() + sg.points.size());
}

std::optional<double> nsd_of(const SurfacePointSet& sp, const SurfacePointSet& sg, double tau) {
  if (sg.empty()) return std::nullopt;
  if (sp.empty()) return 0.0;
  const auto d = nearest_distances(sg, sp);
  std::size_t within = 0;
  for (double v : d) within += v < tau;
  return static_cast<double>(within) / static_cast<double>(d.size());
}

void check_tau(const MetricConfig& cfg) {
  if (!(cfg.tau >= 0.0)) throw Error(Errc::invalid_argument, "tau must be >= 0");
}

}  // namespace

double asd(const LabelMask& pred, const LabelMask& gt, ClassId c, const MetricConfig& cfg) {
  require_same_shape(pred, gt);
  const auto v = asd_of(extract_surface(pred, c, cfg), extract_surface(gt, c, cfg));
  if (!v) throw Error(Errc::empty_surface, fmt::format("class {} surface is empty", int(c)));
  return *v;
}

double nsd(const LabelMask& pred, const LabelMask& gt, ClassId c, const MetricConfig& cfg) {
  require_same_shape(pred, gt);
  check_tau(cfg);
  const auto v = nsd_of(extract_surface(pred, c, cfg), extract_surface(gt, c, cfg), cfg.tau);
  if (!v) throw Error(Errc::empty_surface, fmt::format("class {} ground-truth surface is empty", int(c)));
  return *v;
}

MetricReport evaluate_pair(const LabelMask& pred, const LabelMask& gt, const MetricConfig& cfg) {
  check_tau(cfg);
  const auto counts = confusion_all(pred, gt);
  MetricReport report;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = report.per_class[c];
    m.counts = counts[c];
    m.iou = iou(counts[c]);
    m.dice = dice(counts[c]);
    m.precision = precision(counts[c]);
    m.recall = recall(counts[c]);
    m.f1 = f1(counts[c]);
    const auto sp = extract_surface(pred, static_cast<ClassId>(c), cfg);
    const auto sg = extract_surface(gt, static_cast<ClassId>(c), cfg);
    m.asd = asd_of(sp, sg);
    m.nsd = nsd_of(sp, sg, cfg.tau);
  }
  const int first = cfg.include_background_in_means ? 0 : 1;
  for (int c = first; c < kNumClasses; ++c) {
    report.mean_iou += report.per_class[c].iou;
    report.mean_dice += report.per_class[c].dice;
  }
  report.mean_iou /= kNumClasses - first;
  report.mean_dice /= kNumClasses - first;
  return report;
}

std::string_view class_name(ClassId c) noexcept {
  switch (c) {
    case 0: return "background";
    case 1: return "vertebrae";
    case 2: return "spinal_canal";
    case 3: return "ivd";
  }
  return "unknown";
}

nlohmann::json to_json(const ClassMetrics& m, ClassId c) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"class", class_name(c)},
          {"iou", m.iou},
          {"dice", m.dice},
          {"asd", opt(m.asd)},
          {"nsd", opt(m.nsd)},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"tp", m.counts.tp},
          {"fp", m.counts.fp},
          {"fn", m.counts.fn},
          {"tn", m.counts.tn}};
}

namespace serial {

std::vector<double> nearest_distances(const SurfacePointSet& from, const SurfacePointSet& to) {
  if (to.empty()) throw Error(Errc::empty_surface, "target surface is empty");
  std::vector<double> out;
  out.reserve(from.points.size());
  for (const auto& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points) {
      best = std::min(best, std::hypot((p.row - q.row) * from.spacing.row,
                                       (p.col - q.col) * from.spacing.col));
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace serial

}  // namespace spinecurate
