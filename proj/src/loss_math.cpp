#include "spinecurate/loss_math.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "spinecurate/error.hpp"

namespace spinecurate {

using nlohmann::json;

namespace {

std::size_t idx(std::size_t pixel, int ch) { return pixel * kChannels + static_cast<std::size_t>(ch); }

void require_shape(const ProbTensor& pred, const OneHotTensor& target) {
  if (pred.height != target.height || pred.width != target.width ||
      pred.values.size() != pred.pixels() * kChannels ||
      target.values.size() != target.pixels() * kChannels) {
    throw Error(Errc::shape_mismatch,
                fmt::format("pred {}x{} ({} values) vs target {}x{} ({} values)", pred.height,
                            pred.width, pred.values.size(), target.height, target.width,
                            target.values.size()));
  }
}

// Row partial sums computed in parallel, then added in row order.
template <typename SiteFn>
double ordered_sum(const ProbTensor& pred, SiteFn&& site) {
  std::vector<double> row_sums(static_cast<std::size_t>(pred.height), 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < pred.height; ++r) {
    double s = 0.0;
    for (int c = 0; c < pred.width; ++c) {
      const auto pixel = static_cast<std::size_t>(r) * pred.width + c;
      for (int ch = 0; ch < kChannels; ++ch) s += site(pixel, ch);
    }
    row_sums[static_cast<std::size_t>(r)] = s;
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total;
}

double focal_raw(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  if (pred.pixels() == 0) return 0.0;
  const double sum = ordered_sum(pred, [&](std::size_t pixel, int ch) {
    const double y = target.values[idx(pixel, ch)];
    if (y == 0.0) return 0.0;
    const double q = pred.values[idx(pixel, ch)];
    return p.alpha_class[ch] * std::pow(1.0 - q, p.gamma) * y * std::log(std::max(q, p.prob_floor));
  });
  return -sum / static_cast<double>(pred.pixels());
}

struct DiceSums {
  std::array<double, kChannels> inter{};
  std::array<double, kChannels> sum_true{};
  std::array<double, kChannels> sum_pred{};
};

DiceSums dice_sums(const ProbTensor& pred, const OneHotTensor& target) {
  std::vector<DiceSums> rows(static_cast<std::size_t>(pred.height));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < pred.height; ++r) {
    auto& s = rows[static_cast<std::size_t>(r)];
    for (int c = 0; c < pred.width; ++c) {
      const auto pixel = static_cast<std::size_t>(r) * pred.width + c;
      for (int ch = 0; ch < kChannels; ++ch) {
        const double y = target.values[idx(pixel, ch)];
        const double q = pred.values[idx(pixel, ch)];
        s.inter[ch] += y * q;
        s.sum_true[ch] += y;
        s.sum_pred[ch] += q;
      }
    }
  }
  DiceSums total;
  for (const auto& s : rows) {
    for (int ch = 0; ch < kChannels; ++ch) {
      total.inter[ch] += s.inter[ch];
      total.sum_true[ch] += s.sum_true[ch];
      total.sum_pred[ch] += s.sum_pred[ch];
    }
  }
  return total;
}

double dice_raw(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  const auto s = dice_sums(pred, target);
  if (p.dice_mode == DiceMode::per_class_mean) {
    double acc = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
      acc += (2.0 * s.inter[ch] + p.epsilon) / (s.sum_true[ch] + s.sum_pred[ch] + p.epsilon);
    }
    return 1.0 - acc / kChannels;
  }
  double inter = 0.0, total = 0.0;
  for (int ch = 0; ch < kChannels; ++ch) {
    inter += s.inter[ch];
    total += s.sum_true[ch] + s.sum_pred[ch];
  }
  return 1.0 - (2.0 * inter + p.epsilon) / (total + p.epsilon);
}

}  // namespace

OneHotTensor OneHotTensor::from_labels(const LabelMask& mask) {
  OneHotTensor t{mask.height, mask.width, std::vector<double>(mask.labels.size() * kChannels, 0.0)};
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    if (mask.labels[i] >= kChannels) throw Error(Errc::invalid_argument, "label outside {0,1,2,3}");
    t.values[idx(i, mask.labels[i])] = 1.0;
  }
  return t;
}

void LossParams::validate() const {
  if (!(gamma >= 0.0)) throw Error(Errc::invalid_argument, "gamma must be >= 0");
  if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0)) {
    throw Error(Errc::invalid_argument, "alpha_mix must be in [0, 1]");
  }
  for (double a : alpha_class) {
    if (!(a >= 0.0)) throw Error(Errc::invalid_argument, "alpha_class entries must be >= 0");
  }
  if (!(epsilon > 0.0)) throw Error(Errc::invalid_argument, "epsilon must be > 0");
  if (!(prob_floor > 0.0 && prob_floor < 0.5)) {
    throw Error(Errc::invalid_argument, "prob_floor must be in (0, 0.5)");
  }
}

LossParams LossParams::low_gamma_preset() {
  LossParams p;
  p.gamma = 0.4;
  return p;
}

std::string_view to_string(LossKind k) noexcept {
  switch (k) {
    case LossKind::focal: return "focal";
    case LossKind::dice: return "dice";
    case LossKind::combined: return "combined";
  }
  return "";
}

void validate_probabilities(const ProbTensor& pred) {
  for (std::size_t px = 0; px < pred.pixels(); ++px) {
    double s = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
      const double v = pred.values[idx(px, ch)];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(Errc::not_normalized, fmt::format("pixel {} channel {} = {}", px, ch, v));
      }
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw Error(Errc::not_normalized, fmt::format("pixel {} sums to {}", px, s));
    }
  }
}

void validate_one_hot(const OneHotTensor& target) {
  for (std::size_t px = 0; px < target.pixels(); ++px) {
    int hot = 0;
    for (int ch = 0; ch < kChannels; ++ch) {
      const double v = target.values[idx(px, ch)];
      if (v != 0.0 && v != 1.0) {
        throw Error(Errc::invalid_argument, fmt::format("target pixel {} is not one-hot", px));
      }
      hot += v == 1.0;
    }
    if (hot != 1) throw Error(Errc::invalid_argument, fmt::format("target pixel {} is not one-hot", px));
  }
}

namespace {
void validate_inputs(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  require_shape(pred, target);
  p.validate();
  validate_probabilities(pred);
  validate_one_hot(target);
}
}  // namespace

double focal_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  validate_inputs(pred, target, p);
  return focal_raw(pred, target, p);
}

double dice_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  validate_inputs(pred, target, p);
  return dice_raw(pred, target, p);
}

double combined_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  validate_inputs(pred, target, p);
  return p.alpha_mix * focal_raw(pred, target, p) + (1.0 - p.alpha_mix) * dice_raw(pred, target, p);
}

double evaluate_loss(LossKind kind, const ProbTensor& pred, const OneHotTensor& target,
                     const LossParams& p) {
  require_shape(pred, target);
  switch (kind) {
    case LossKind::focal: return focal_raw(pred, target, p);
    case LossKind::dice: return dice_raw(pred, target, p);
    case LossKind::combined:
      return p.alpha_mix * focal_raw(pred, target, p) +
             (1.0 - p.alpha_mix) * dice_raw(pred, target, p);
  }
  return 0.0;
}

std::vector<double> loss_gradient(LossKind kind, const ProbTensor& pred, const OneHotTensor& target,
                                  const LossParams& p) {
  require_shape(pred, target);
  const std::size_t n = pred.values.size();
  std::vector<double> focal(n, 0.0), dice(n, 0.0);

  if (kind != LossKind::dice && pred.pixels() > 0) {
    const double inv_pixels = 1.0 / static_cast<double>(pred.pixels());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const double y = target.values[i];
      if (y == 0.0) continue;
      const int ch = static_cast<int>(i % kChannels);
      const double q = pred.values[i];
      const double log_term = std::log(std::max(q, p.prob_floor));
      // d/dq [(1-q)^g log q] = (1-q)^g / q - g (1-q)^(g-1) log q
      double d = q >= p.prob_floor ? std::pow(1.0 - q, p.gamma) / q : 0.0;
      if (p.gamma != 0.0) d -= p.gamma * std::pow(1.0 - q, p.gamma - 1.0) * log_term;
      focal[i] = -p.alpha_class[ch] * y * d * inv_pixels;
    }
  }
  if (kind != LossKind::focal) {
    const auto s = dice_sums(pred, target);
    if (p.dice_mode == DiceMode::global) {
      double inter = 0.0, total = 0.0;
      for (int ch = 0; ch < kChannels; ++ch) {
        inter += s.inter[ch];
        total += s.sum_true[ch] + s.sum_pred[ch];
      }
      const double num = 2.0 * inter + p.epsilon;
      const double den = total + p.epsilon;
      for (std::size_t i = 0; i < n; ++i) dice[i] = -(2.0 * target.values[i] * den - num) / (den * den);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const int ch = static_cast<int>(i % kChannels);
        const double num = 2.0 * s.inter[ch] + p.epsilon;
        const double den = s.sum_true[ch] + s.sum_pred[ch] + p.epsilon;
        dice[i] = -(2.0 * target.values[i] * den - num) / (den * den) / kChannels;
      }
    }
  }
  switch (kind) {
    case LossKind::focal: return focal;
    case LossKind::dice: return dice;
    case LossKind::combined: break;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = p.alpha_mix * focal[i] + (1.0 - p.alpha_mix) * dice[i];
  return out;
}

std::vector<double> finite_diff_grad(LossKind kind, const ProbTensor& pred,
                                     const OneHotTensor& target, const LossParams& p, double h) {
  require_shape(pred, target);
  if (!(h > 0.0)) throw Error(Errc::invalid_argument, "step h must be > 0");
  if (kind != LossKind::dice) {
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
      const double q = pred.values[i];
      if (q - h < p.prob_floor || q + h > 1.0 - p.prob_floor) {
        throw Error(Errc::perturbation_out_of_range,
                    fmt::format("site {} = {} with h = {} leaves [{}, {}]", i, q, h, p.prob_floor,
                                1.0 - p.prob_floor));
      }
    }
  }
  std::vector<double> grad(pred.values.size());
  ProbTensor work = pred;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double q = pred.values[i];
    work.values[i] = q + h;
    const double up = evaluate_loss(kind, work, target, p);
    work.values[i] = q - h;
    const double down = evaluate_loss(kind, work, target, p);
    work.values[i] = q;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ProbTensor random_prob_tensor(std::uint64_t seed, int height, int width, double logit_range) {
  std::mt19937_64 rng(seed);
  ProbTensor t{height, width, std::vector<double>(static_cast<std::size_t>(height) * width * kChannels)};
  for (std::size_t px = 0; px < t.pixels(); ++px) {
    std::array<double, kChannels> e{};
    double z = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
      e[ch] = std::exp((2.0 * unit_uniform(rng) - 1.0) * logit_range);
      z += e[ch];
    }
    for (int ch = 0; ch < kChannels; ++ch) t.values[idx(px, ch)] = e[ch] / z;
  }
  return t;
}

OneHotTensor random_one_hot(std::uint64_t seed, int height, int width) {
  std::mt19937_64 rng(seed);
  LabelMask labels(width, height);
  for (auto& l : labels.labels) l = static_cast<ClassId>(rng() % kChannels);
  return OneHotTensor::from_labels(labels);
}

std::vector<TestVector> make_test_vectors(std::uint64_t seed, int count,
                                          const LossParams& params) {
  params.validate();
  if (count < 1) throw Error(Errc::invalid_argument, "count must be >= 1");
  std::vector<TestVector> out;
  for (int i = 0; i < count; ++i) {
    const int side = i % 2 == 0 ? 4 : 8;
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    TestVector v;
    v.id = fmt::format("v{:04d}", i);
    v.seed = s;
    v.pred = random_prob_tensor(s * 2 + 1, side, side);
    v.target = random_one_hot(s * 2 + 2, side, side);
    v.params = params;
    v.focal = focal_loss(v.pred, v.target, v.params);
    v.dice = dice_loss(v.pred, v.target, v.params);
    v.combined = combined_loss(v.pred, v.target, v.params);
    out.push_back(std::move(v));
  }
  return out;
}

void write_test_vectors(std::ostream& out, const std::vector<TestVector>& vectors) {
  for (const auto& v : vectors) {
    json j;
    j["id"] = v.id;
    j["seed"] = v.seed;
    j["height"] = v.pred.height;
    j["width"] = v.pred.width;
    j["channels"] = kChannels;
    j["gamma"] = v.params.gamma;
    j["alpha_mix"] = v.params.alpha_mix;
    j["alpha_class"] = v.params.alpha_class;
    j["epsilon"] = v.params.epsilon;
    j["prob_floor"] = v.params.prob_floor;
    j["dice_mode"] = v.params.dice_mode == DiceMode::global ? "global" : "per_class_mean";
    j["pred"] = v.pred.values;
    j["true"] = v.target.values;
    j["focal"] = v.focal;
    j["dice"] = v.dice;
    j["combined"] = v.combined;
    out << j.dump() << '\n';
  }
}

std::vector<TestVector> read_test_vectors(std::istream& in) {
  std::vector<TestVector> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      TestVector v;
      v.id = j.at("id").get<std::string>();
      v.seed = j.at("seed").get<std::uint64_t>();
      const int h = j.at("height").get<int>();
      const int w = j.at("width").get<int>();
      if (j.at("channels").get<int>() != kChannels) {
        throw Error(Errc::unsupported_value, fmt::format("vector {}: channels != 4", v.id));
      }
      v.params.gamma = j.at("gamma").get<double>();
      v.params.alpha_mix = j.at("alpha_mix").get<double>();
      v.params.alpha_class = j.at("alpha_class").get<std::array<double, kChannels>>();
      v.params.epsilon = j.at("epsilon").get<double>();
      v.params.prob_floor = j.at("prob_floor").get<double>();
      v.params.dice_mode = j.value("dice_mode", "global") == "global" ? DiceMode::global
                                                                       : DiceMode::per_class_mean;
      v.pred = ProbTensor{h, w, j.at("pred").get<std::vector<double>>()};
      v.target = OneHotTensor{h, w, j.at("true").get<std::vector<double>>()};
      v.focal = j.at("focal").get<double>();
      v.dice = j.at("dice").get<double>();
      v.combined = j.at("combined").get<double>();
      require_shape(v.pred, v.target);
      out.push_back(std::move(v));
    } catch (const json::exception& ex) {
      throw Error(Errc::malformed_line, fmt::format("vector line {}: {}", line_no, ex.what()));
    }
  }
  return out;
}

std::vector<VectorMismatch> verify_test_vectors(const std::vector<TestVector>& vectors,
                                                double tolerance) {
  std::vector<VectorMismatch> out;
  for (const auto& v : vectors) {
    const std::array<std::pair<const char*, double>, 3> checks{{
        {"focal", v.focal},
        {"dice", v.dice},
        {"combined", v.combined},
    }};
    const std::array<double, 3> recomputed{focal_loss(v.pred, v.target, v.params),
                                           dice_loss(v.pred, v.target, v.params),
                                           combined_loss(v.pred, v.target, v.params)};
    for (std::size_t k = 0; k < checks.size(); ++k) {
      if (!(std::abs(checks[k].second - recomputed[k]) <= tolerance)) {
        out.push_back({v.id, checks[k].first, checks[k].second, recomputed[k]});
      }
    }
  }
  return out;
}

namespace serial {

double focal_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  validate_inputs(pred, target, p);
  if (pred.pixels() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double y = target.values[i];
    const double q = pred.values[i];
    const int ch = static_cast<int>(i % kChannels);
    if (y != 0.0) {
      sum += p.alpha_class[ch] * std::pow(1.0 - q, p.gamma) * y * std::log(std::max(q, p.prob_floor));
    }
  }
  return -sum / static_cast<double>(pred.pixels());
}

double dice_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p) {
  validate_inputs(pred, target, p);
  if (p.dice_mode == DiceMode::per_class_mean) {
    double acc = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
      double inter = 0.0, st = 0.0, sp = 0.0;
      for (std::size_t px = 0; px < pred.pixels(); ++px) {
        inter += target.values[idx(px, ch)] * pred.values[idx(px, ch)];
        st += target.values[idx(px, ch)];
        sp += pred.values[idx(px, ch)];
      }
      acc += (2.0 * inter + p.epsilon) / (st + sp + p.epsilon);
    }
    return 1.0 - acc / kChannels;
  }
  double inter = 0.0, st = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    inter += target.values[i] * pred.values[i];
    st += target.values[i];
    sp += pred.values[i];
  }
  return 1.0 - (2.0 * inter + p.epsilon) / (st + sp + p.epsilon);
}

}  // namespace serial

}  // namespace spinecurate
