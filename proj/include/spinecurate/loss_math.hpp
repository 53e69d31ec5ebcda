#pragma once

// Reference focal / dice / combined losses over 4-channel per-pixel
// probability maps, with analytic and central-difference gradients and a
// test-vector format for cross-implementation parity checks.
//
// Tensors are height x width x 4, channel-fastest. Reductions are computed
// per row in parallel and then summed in row order, so results do not depend
// on the thread count.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinecurate/image.hpp"

namespace spinecurate {

inline constexpr int kChannels = kNumClasses;

struct ProbTensor {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const ProbTensor& o) const { return height == o.height && width == o.width; }
};

/// Hard one-hot targets stored as 0.0 / 1.0 doubles so the loss formulas read
/// the same for both operands.
struct OneHotTensor {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  static OneHotTensor from_labels(const LabelMask& mask);
};

enum class DiceMode { global, per_class_mean };

struct LossParams {
  double gamma = 4.0;
  double alpha_mix = 0.6;
  std::array<double, kChannels> alpha_class{1.0, 1.0, 1.0, 1.0};
  double epsilon = 1e-6;
  double prob_floor = 1e-7;
  DiceMode dice_mode = DiceMode::global;

  void validate() const;  // throws Error{invalid_argument}

  /// gamma = 0.4 reading of the focusing exponent.
  static LossParams low_gamma_preset();
};

enum class LossKind { focal, dice, combined };

std::string_view to_string(LossKind k) noexcept;

/// Throws Error{not_normalized} unless every value is in [0, 1] and each
/// pixel sums to 1 within 1e-6.
void validate_probabilities(const ProbTensor& pred);
/// Throws Error{invalid_argument} unless each pixel has exactly one 1.
void validate_one_hot(const OneHotTensor& target);

// Each of these validates shapes (Error{shape_mismatch}) and normalisation.

/// -(1/P) sum_sites alpha_c (1 - p)^gamma y log(max(p, floor)), P = pixel count.
double focal_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p);
/// 1 - (2 sum y p + eps) / (sum y + sum p + eps) over every site jointly
/// (or averaged per channel in DiceMode::per_class_mean).
double dice_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p);
double combined_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p);

/// Same formulas without the normalisation check, for raw partial derivatives.
double evaluate_loss(LossKind kind, const ProbTensor& pred, const OneHotTensor& target,
                     const LossParams& p);

/// Analytic d loss / d pred per site (same layout as pred.values).
std::vector<double> loss_gradient(LossKind kind, const ProbTensor& pred, const OneHotTensor& target,
                                  const LossParams& p);

/// (L(x + h e_i) - L(x - h e_i)) / 2h per site, without renormalising.
/// Focal terms require every site in [floor + h, 1 - floor - h] so the log
/// clamp is never crossed; throws Error{perturbation_out_of_range} otherwise.
std::vector<double> finite_diff_grad(LossKind kind, const ProbTensor& pred,
                                     const OneHotTensor& target, const LossParams& p, double h);

struct TestVector {
  std::string id;
  std::uint64_t seed = 0;
  ProbTensor pred;
  OneHotTensor target;
  LossParams params;
  double focal = 0;
  double dice = 0;
  double combined = 0;
};

/// Seeded tensors alternating between 4x4 and 8x8 with losses evaluated at
/// `params` (defaults: gamma = 4, alpha_mix = 0.6).
std::vector<TestVector> make_test_vectors(std::uint64_t seed, int count,
                                          const LossParams& params = LossParams{});

void write_test_vectors(std::ostream& out, const std::vector<TestVector>& vectors);
std::vector<TestVector> read_test_vectors(std::istream& in);

struct VectorMismatch {
  std::string id;
  std::string field;
  double stored = 0;
  double recomputed = 0;
};

/// Recomputes every stored loss; mismatches beyond `tolerance` are returned.
std::vector<VectorMismatch> verify_test_vectors(const std::vector<TestVector>& vectors,
                                                double tolerance = 1e-12);

/// Seeded softmax-of-uniform-logits probability map; logits in
/// [-logit_range, logit_range].
ProbTensor random_prob_tensor(std::uint64_t seed, int height, int width, double logit_range = 2.0);
OneHotTensor random_one_hot(std::uint64_t seed, int height, int width);

namespace serial {
double focal_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p);
double dice_loss(const ProbTensor& pred, const OneHotTensor& target, const LossParams& p);
}  // namespace serial

}  // namespace spinecurate
