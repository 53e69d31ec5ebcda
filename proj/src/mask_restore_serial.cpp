// Single-threaded reference for the restoration rules. Operates directly on
// RGB values with ordered maps; kept deliberately plain.

#include <map>
#include <tuple>

#include "spinecurate/error.hpp"
#include "spinecurate/mask_restore.hpp"

namespace spinecurate::serial {

namespace {

using Key = std::tuple<int, int, int>;

Key key_of(Rgb c) { return {c.r, c.g, c.b}; }
Rgb rgb_of(const Key& k) {
  return Rgb{static_cast<std::uint8_t>(std::get<0>(k)), static_cast<std::uint8_t>(std::get<1>(k)),
             static_cast<std::uint8_t>(std::get<2>(k))};
}

std::vector<Rgb> neighbors(const RgbMask& m, int r, int c, Neighborhood nb) {
  std::vector<Rgb> out;
  const int n = nb.connectivity == Connectivity::four ? 4 : 8;
  for (int k = 0; k < n; ++k) {
    const int rr = r + kNeighborOffsets[k][0];
    const int cc = c + kNeighborOffsets[k][1];
    if (rr >= 0 && rr < m.height && cc >= 0 && cc < m.width) out.push_back(m.at(rr, cc));
  }
  return out;
}

Rgb most_common(const std::vector<Rgb>& colors, Rgb own, ColorClassMap map) {
  std::map<Key, int> histogram;
  for (const auto& c : colors) histogram[key_of(c)] += 1;
  int best = 0;
  for (const auto& [k, n] : histogram) best = std::max(best, n);
  if (histogram.count(key_of(own)) && histogram[key_of(own)] == best) return own;
  Rgb pick{};
  int pick_class = kNumClasses;
  for (const auto& [k, n] : histogram) {
    const int cls = map.class_of(rgb_of(k));
    if (n == best && cls < pick_class) {
      pick = rgb_of(k);
      pick_class = cls;
    }
  }
  return pick;
}

void require_canonical(const RgbMask& m) {
  for (const auto& p : m.pixels) {
    if (!is_canonical(p)) throw Error(Errc::not_canonical, "non-canonical pixel");
  }
}

}  // namespace

RgbMask remove_outlines(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  require_canonical(mask);
  RgbMask out = mask;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const auto nbrs = neighbors(mask, r, c, nb);
      if (!nbrs.empty()) out.at(r, c) = most_common(nbrs, mask.at(r, c), map);
    }
  }
  return out;
}

RgbMask fix_disagreeing_borders(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  require_canonical(mask);
  RgbMask out = mask;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const Rgb own = mask.at(r, c);
      std::vector<Rgb> pair;
      if (c > 0) pair.push_back(mask.at(r, c - 1));
      if (c + 1 < mask.width) pair.push_back(mask.at(r, c + 1));
      if (pair.empty()) continue;
      bool all_differ = true;
      for (const auto& p : pair) all_differ = all_differ && !(p == own);
      if (all_differ) out.at(r, c) = most_common(neighbors(mask, r, c, nb), own, map);
    }
  }
  return out;
}

RgbMask replace_singletons(const RgbMask& mask, Neighborhood nb, ColorClassMap map) {
  require_canonical(mask);
  RgbMask out = mask;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const auto nbrs = neighbors(mask, r, c, nb);
      if (nbrs.empty()) continue;
      bool lonely = true;
      for (const auto& p : nbrs) lonely = lonely && !(p == mask.at(r, c));
      if (lonely) out.at(r, c) = most_common(nbrs, mask.at(r, c), map);
    }
  }
  return out;
}

AptaResult apta(const RgbMask& mask, const PaletteRules& rules, Neighborhood nb, int max_rounds) {
  if (max_rounds < 1) throw Error(Errc::invalid_argument, "max_rounds must be >= 1");
  RgbMask cur = replace_color_ranges(mask, rules);
  AptaResult result;
  for (int round = 1; round <= max_rounds; ++round) {
    result.rounds = round;
    // Rule 2 adopts an equal colour and therefore never alters a pixel.
    // Convergence means no individual rule changed anything this round.
    bool changed = false;
    auto step = [&](RgbMask next) {
      changed = changed || !(next == cur);
      cur = std::move(next);
    };
    step(serial::remove_outlines(cur, nb, rules.classes));
    step(serial::fix_disagreeing_borders(cur, nb, rules.classes));
    step(serial::replace_singletons(cur, nb, rules.classes));
    step(ensure_red_presence(cur));
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  result.labels = to_labels(cur, rules.classes);
  return result;
}

}  // namespace spinecurate::serial
