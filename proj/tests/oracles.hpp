#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library: surfaces are re-derived pixel by pixel and
// distances are computed over all point pairs in long double.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "spinecurate/image.hpp"

namespace oracle {

using spinecurate::ClassId;
using spinecurate::LabelMask;

struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts confusion(const LabelMask& pred, const LabelMask& gt, ClassId c) {
  Counts k;
  for (int r = 0; r < gt.height; ++r) {
    for (int col = 0; col < gt.width; ++col) {
      const bool p = pred.at(r, col) == c;
      const bool g = gt.at(r, col) == c;
      if (p && g) ++k.tp;
      else if (p) ++k.fp;
      else if (g) ++k.fn;
      else ++k.tn;
    }
  }
  return k;
}

// Ratio num / den; 1 when the class is absent from both masks, 0 when only
// the denominator's side is missing.
inline double ratio(std::int64_t num, std::int64_t den, const Counts& k) {
  if (den > 0) return static_cast<double>(num) / static_cast<double>(den);
  return (k.tp + k.fp + k.fn) == 0 ? 1.0 : 0.0;
}

inline double iou(const Counts& k) { return ratio(k.tp, k.tp + k.fp + k.fn, k); }
inline double dice(const Counts& k) { return ratio(2 * k.tp, 2 * k.tp + k.fp + k.fn, k); }
inline double precision(const Counts& k) {
  if (k.tp + k.fp == 0) return k.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
}
inline double recall(const Counts& k) {
  if (k.tp + k.fn == 0) return k.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
}

struct Point {
  int r, c;
};

inline std::vector<Point> surface(const LabelMask& m, ClassId cls, bool eight) {
  std::vector<Point> out;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(r, c) != cls) continue;
      bool edge = false;
      for (int dr = -1; dr <= 1 && !edge; ++dr) {
        for (int dc = -1; dc <= 1 && !edge; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (!eight && dr != 0 && dc != 0) continue;
          const int rr = r + dr, cc = c + dc;
          edge = rr < 0 || cc < 0 || rr >= m.height || cc >= m.width || m.at(rr, cc) != cls;
        }
      }
      if (edge) out.push_back({r, c});
    }
  }
  return out;
}

inline long double nearest(const Point& p, const std::vector<Point>& to, double sr, double sc) {
  long double best = std::numeric_limits<long double>::infinity();
  for (const auto& q : to) {
    const long double dy = static_cast<long double>(p.r - q.r) * sr;
    const long double dx = static_cast<long double>(p.c - q.c) * sc;
    best = std::min(best, std::sqrt(dy * dy + dx * dx));
  }
  return best;
}

inline std::optional<double> asd(const LabelMask& pred, const LabelMask& gt, ClassId c,
                                 double sr = 1.0, double sc = 1.0, bool eight = false) {
  const auto sp = surface(pred, c, eight);
  const auto sg = surface(gt, c, eight);
  if (sp.empty() || sg.empty()) return std::nullopt;
  long double sum = 0;
  for (const auto& p : sp) sum += nearest(p, sg, sr, sc);
  for (const auto& g : sg) sum += nearest(g, sp, sr, sc);
  return static_cast<double>(sum / static_cast<long double>(sp.size() + sg.size()));
}

inline std::optional<double> nsd(const LabelMask& pred, const LabelMask& gt, ClassId c, double tau) {
  const auto sp = surface(pred, c, false);
  const auto sg = surface(gt, c, false);
  if (sg.empty()) return std::nullopt;
  if (sp.empty()) return 0.0;
  std::size_t within = 0;
  for (const auto& g : sg) within += nearest(g, sp, 1.0, 1.0) < tau;
  return static_cast<double>(within) / static_cast<double>(sg.size());
}

/// alpha (1 - p)^gamma (-ln p) for one pixel, in 50-digit arithmetic.
inline double focal_single(double p, double gamma, double alpha) {
  using boost::multiprecision::cpp_bin_float_50;
  const cpp_bin_float_50 bp(p);
  return static_cast<double>(cpp_bin_float_50(alpha) * pow(1 - bp, cpp_bin_float_50(gamma)) * -log(bp));
}

inline LabelMask random_mask(std::mt19937_64& rng, int w, int h, int classes = spinecurate::kNumClasses) {
  LabelMask m(w, h, 0);
  for (auto& v : m.labels) v = static_cast<ClassId>(rng() % static_cast<unsigned>(classes));
  return m;
}

}  // namespace oracle
