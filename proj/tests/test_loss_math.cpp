#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spinecurate/error.hpp"
#include "spinecurate/loss_math.hpp"

using namespace spinecurate;

namespace {

ProbTensor one_pixel(double p_true) {
  const double rest = (1.0 - p_true) / 3.0;
  return {1, 1, {p_true, rest, rest, rest}};
}

const OneHotTensor kFirstClass{1, 1, {1.0, 0.0, 0.0, 0.0}};

}  // namespace

TEST(Focal, ClosedForm) {
  LossParams p;
  p.alpha_class = {0.6, 0.6, 0.6, 0.6};
  const double expected = oracle::focal_single(0.5, 4.0, 0.6);
  EXPECT_NEAR(expected, 0.025993019270997949, 1e-17);
  EXPECT_NEAR(focal_loss(one_pixel(0.5), kFirstClass, p), expected, 1e-15);
  EXPECT_NEAR(focal_loss(one_pixel(0.5), kFirstClass, p), 0.0259930, 1e-6);
}

TEST(Focal, MatchesHighPrecisionAcrossGamma) {
  for (double g : {0.0, 0.4, 1.0, 2.0, 4.0}) {
    for (double q : {0.05, 0.3, 0.9}) {
      LossParams p;
      p.gamma = g;
      EXPECT_NEAR(focal_loss(one_pixel(q), kFirstClass, p), oracle::focal_single(q, g, 1.0), 1e-14);
    }
  }
}

TEST(Focal, GammaZeroIsCrossEntropy) {
  LossParams p;
  p.gamma = 0;
  const auto pred = random_prob_tensor(11, 4, 4);
  const auto target = random_one_hot(12, 4, 4);
  double ce = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (target.values[i] == 1.0) ce -= std::log(pred.values[i]);
  }
  EXPECT_NEAR(focal_loss(pred, target, p), ce / 16.0, 1e-12);
}

TEST(Dice, PerfectPredictionNearZero) {
  LabelMask m(3, 3, 0);
  m.at(1, 1) = 2;
  const auto t = OneHotTensor::from_labels(m);
  ProbTensor p{3, 3, t.values};
  EXPECT_NEAR(dice_loss(p, t, {}), 0.0, 1e-6);
  LossParams per;
  per.dice_mode = DiceMode::per_class_mean;
  EXPECT_NEAR(dice_loss(p, t, per), 0.0, 1e-6);
}

TEST(Combined, LinearInAlphaMix) {
  const auto pred = random_prob_tensor(3, 4, 4);
  const auto target = random_one_hot(4, 4, 4);
  for (double a : {0.0, 0.3, 0.6, 1.0}) {
    LossParams p;
    p.alpha_mix = a;
    EXPECT_NEAR(combined_loss(pred, target, p),
                a * focal_loss(pred, target, p) + (1 - a) * dice_loss(pred, target, p), 1e-12);
  }
}

TEST(Validation, Errors) {
  ProbTensor bad{1, 1, {0.5, 0.5, 0.5, 0.5}};
  try {
    focal_loss(bad, kFirstClass, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_normalized);
  }
  ProbTensor two{2, 1, {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25}};
  EXPECT_THROW(dice_loss(two, kFirstClass, {}), Error);
  LossParams p;
  p.alpha_mix = 1.5;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_DOUBLE_EQ(LossParams::low_gamma_preset().gamma, 0.4);
}

TEST(Gradient, AgreesWithCentralDifferences) {
  for (int t = 0; t < 20; ++t) {
    const auto pred = random_prob_tensor(100 + t, 4, 4);
    const auto target = random_one_hot(200 + t, 4, 4);
    for (auto mode : {DiceMode::global, DiceMode::per_class_mean}) {
      LossParams p;
      p.dice_mode = mode;
      for (auto kind : {LossKind::focal, LossKind::dice, LossKind::combined}) {
        const auto a = loss_gradient(kind, pred, target, p);
        const auto n = finite_diff_grad(kind, pred, target, p, 1e-6);
        double diff = 0, na = 0, nn = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          diff += (a[i] - n[i]) * (a[i] - n[i]);
          na += a[i] * a[i];
          nn += n[i] * n[i];
        }
        EXPECT_LT(std::sqrt(diff / std::max(na, nn)), 1e-5) << to_string(kind);
      }
    }
  }
}

TEST(Gradient, PerturbationOutOfRange) {
  try {
    finite_diff_grad(LossKind::focal, one_pixel(1.0 - 1e-9), kFirstClass, {}, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::perturbation_out_of_range);
  }
  EXPECT_NO_THROW(finite_diff_grad(LossKind::dice, one_pixel(1.0), kFirstClass, {}, 1e-6));
}

TEST(Serial, MatchesParallel) {
  for (int t = 0; t < 10; ++t) {
    const auto pred = random_prob_tensor(t, 9, 7);
    const auto target = random_one_hot(t + 50, 9, 7);
    LossParams p;
    EXPECT_NEAR(focal_loss(pred, target, p), serial::focal_loss(pred, target, p), 1e-14);
    EXPECT_NEAR(dice_loss(pred, target, p), serial::dice_loss(pred, target, p), 1e-14);
  }
}

TEST(Vectors, RoundTripAndDetectCorruption) {
  const auto vs = make_test_vectors(5, 4);
  ASSERT_EQ(vs.size(), 4u);
  EXPECT_EQ(vs[0].pred.height, 4);
  EXPECT_EQ(vs[1].pred.height, 8);
  std::stringstream ss;
  write_test_vectors(ss, vs);
  auto back = read_test_vectors(ss);
  EXPECT_TRUE(verify_test_vectors(back, 0.0).empty());
  back[2].dice += 1e-6;
  const auto bad = verify_test_vectors(back);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(bad[0].id, vs[2].id);
  EXPECT_EQ(bad[0].field, "dice");
}

TEST(Vectors, SeedDeterministic) {
  std::stringstream a, b;
  write_test_vectors(a, make_test_vectors(9, 3));
  write_test_vectors(b, make_test_vectors(9, 3));
  EXPECT_EQ(a.str(), b.str());
  LossParams p;
  p.alpha_mix = 0.0;
  const auto dice_only = make_test_vectors(9, 1, p);
  EXPECT_DOUBLE_EQ(dice_only[0].combined, dice_only[0].dice);
}
