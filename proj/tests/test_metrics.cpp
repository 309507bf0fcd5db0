#include <gtest/gtest.h>

#include <random>

#include "blocks/errors.hpp"
#include "blocks/metrics.hpp"
#include "oracles.hpp"

using namespace bw;
using namespace bw::testing;

namespace {

DepthMap depth_row(const std::vector<float>& v) {
  DepthMap d(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) d.at(static_cast<int>(i), 0) = v[i];
  return d;
}

// Dyadic depths in [1, 9): every affine image with the criterion's
// coefficients is exact in float.
DepthMap dyadic_gt(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> q(0, 255);
  DepthMap d(w, h);
  for (float& v : d.values()) v = 1.0f + static_cast<float>(q(rng)) / 32.0f;
  return d;
}

BinaryMask all_valid(int w, int h) { return BinaryMask(w, h, 1, 1); }

}  // namespace

TEST(AlignDepth, IdentityAndAffineInverse) {
  const DepthMap gt = dyadic_gt(16, 8, 1);
  const DepthAlignment a = align_depth(gt, gt, all_valid(16, 8));
  EXPECT_DOUBLE_EQ(a.scale, 1.0);
  EXPECT_DOUBLE_EQ(a.shift, 0.0);
  EXPECT_EQ(a.residual, 0.0);
  DepthMap pred = gt;
  for (float& v : pred.values()) v = 2.0f * v + 3.0f;
  const DepthAlignment b = align_depth(pred, gt, all_valid(16, 8));
  EXPECT_DOUBLE_EQ(b.scale, 0.5);
  EXPECT_DOUBLE_EQ(b.shift, -1.5);
  EXPECT_EQ(b.residual, 0.0);
  EXPECT_EQ(b.count, 128u);
}

TEST(AlignDepth, MatchesNormalEquations) {
  const DepthMap gt = depth_row({1.0f, 2.0f, 4.0f});
  const DepthMap pred = depth_row({1.0f, 3.0f, 2.0f});
  // Sums: n=3, Sp=6, Spp=14, Sg=7, Spg=15.
  // [14 6; 6 3] [s; t] = [15; 7]  ->  s = 0.5, t = 4/3.
  const DepthAlignment a = align_depth(pred, gt, all_valid(3, 1));
  EXPECT_NEAR(a.scale, 0.5, 1e-15);
  EXPECT_NEAR(a.shift, 4.0 / 3.0, 1e-15);
  // Residuals: 0.5+4/3-1, 1.5+4/3-2, 1+4/3-4 -> 5/6, 5/6, -5/3.
  EXPECT_NEAR(a.residual, (25.0 / 36 + 25.0 / 36 + 25.0 / 9) / 3.0, 1e-15);
}

TEST(AlignDepth, TwoPixelFitIsExact) {
  const DepthMap gt = depth_row({2.0f, 3.0f});
  const DepthMap pred = depth_row({2.2f, 1.8f});
  const DepthAlignment a = align_depth(pred, gt, all_valid(2, 1));
  EXPECT_NEAR(a.scale, (3.0 - 2.0) / (1.8 - 2.2), 1e-6);
  EXPECT_NEAR(a.residual, 0.0, 1e-12);
}

TEST(AlignDepth, OptimalityUnderPerturbation) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.05);
  const DepthMap gt = dyadic_gt(20, 20, 3);
  DepthMap pred = gt;
  for (float& v : pred.values()) v = static_cast<float>(0.7 * v + 0.2 + n(rng));
  const BinaryMask valid = all_valid(20, 20);
  const DepthAlignment a = align_depth(pred, gt, valid);
  auto residual = [&](double s, double t) {
    double sq = 0.0;
    for (std::size_t i = 0; i < gt.values().size(); ++i) {
      const double r = s * pred.values()[i] + t - gt.values()[i];
      sq += r * r;
    }
    return sq / static_cast<double>(gt.values().size());
  };
  for (double ds : {-1e-3, 0.0, 1e-3}) {
    for (double dt : {-1e-3, 0.0, 1e-3}) {
      EXPECT_GE(residual(a.scale + ds, a.shift + dt), a.residual - 1e-12);
    }
  }
}

TEST(AlignDepth, NoiseResidualMatchesVariance) {
  double total = 0.0;
  for (int seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> n(0.0, 0.01);
    const DepthMap gt = dyadic_gt(64, 64, 200 + seed);
    DepthMap pred = gt;
    for (float& v : pred.values()) v = static_cast<float>(v + n(rng));
    total += align_depth(pred, gt, all_valid(64, 64)).residual;
  }
  EXPECT_NEAR(total / 8.0, 1e-4, 5e-6);
}

TEST(AlignDepth, Degenerate) {
  const DepthMap gt = depth_row({1.0f, 2.0f, 3.0f});
  const DepthAlignment a = align_depth(depth_row({5.0f, 5.0f, 5.0f}), gt, all_valid(3, 1));
  EXPECT_TRUE(a.degenerate);
  EXPECT_EQ(a.scale, 0.0);
  EXPECT_DOUBLE_EQ(a.shift, 2.0);
  // Constant ground truth and too few pixels are rejected.
  EXPECT_THROW(align_depth(gt, depth_row({2.0f, 2.0f, 2.0f}), all_valid(3, 1)),
               ValidationError);
  BinaryMask one(3, 1, 1, 0);
  one.at(1, 0) = 1;
  EXPECT_THROW(align_depth(gt, gt, one), ValidationError);
}

TEST(AbsRel, ExactZeroForAffinePredictions) {
  const DepthMap gt = dyadic_gt(32, 32, 4);
  const BinaryMask valid = all_valid(32, 32);
  for (float a : {0.5f, 2.0f, 10.0f}) {
    for (float b : {-1.0f, 0.0f, 3.0f}) {
      DepthMap pred = gt;
      for (float& v : pred.values()) v = a * v + b;
      EXPECT_EQ(absrel(pred, gt, valid), 0.0) << a << " " << b;
    }
  }
}

TEST(AbsRel, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  const DepthMap gt = dyadic_gt(24, 24, 6);
  DepthMap pred = gt;
  for (float& v : pred.values()) v = static_cast<float>(v * (1.0 + u(rng)));
  const BinaryMask valid = all_valid(24, 24);
  const double base = absrel(pred, gt, valid);
  EXPECT_GT(base, 0.0);
  DepthMap scaled = pred;
  for (float& v : scaled.values()) v = 4.0f * v + 2.0f;
  EXPECT_NEAR(absrel(scaled, gt, valid), base, 1e-6);
}

TEST(AbsRel, ValidMaskAndPositivity) {
  DepthMap gt = depth_row({1.0f, 2.0f, 0.0f, 4.0f});
  const DepthMap pred = depth_row({1.0f, 2.0f, 3.0f, 0.0f});
  const BinaryMask valid = depth_valid_mask(pred, gt);
  EXPECT_EQ(valid.at(0, 0), 1);
  EXPECT_EQ(valid.at(2, 0), 0);
  EXPECT_EQ(valid.at(3, 0), 0);
  EXPECT_EQ(absrel(pred, gt, valid), 0.0);
  EXPECT_THROW(absrel(pred, gt, all_valid(4, 1)), ValidationError);
}

TEST(Psnr, UniformOffsetIsTwentyDb) {
  std::mt19937_64 rng(7);
  Image a = random_image(rng, 40, 30);
  for (float& v : a.values()) v *= 0.8f;
  Image b = a;
  for (float& v : b.values()) v += 0.1f;
  EXPECT_NEAR(masked_psnr(a, b, FloatRaster(40, 30, 1, 1.0f)), 20.0, 0.01);
}

TEST(Psnr, IdenticalIsCappedAndMaskRestricts) {
  std::mt19937_64 rng(8);
  const Image a = random_image(rng, 10, 10);
  EXPECT_EQ(masked_psnr(a, a, FloatRaster(10, 10, 1, 1.0f)), kPsnrCap);
  Image b = a;
  b.at(3, 3, 0) = 1.0f - a.at(3, 3, 0);
  FloatRaster mask(10, 10, 1, 1.0f);
  mask.at(3, 3) = 0.0f;
  EXPECT_EQ(masked_psnr(a, b, mask), kPsnrCap);
  EXPECT_THROW(masked_psnr(a, b, FloatRaster(10, 10, 1, 0.0f)), ValidationError);
}

TEST(Ssim, IdentityAndSymmetry) {
  std::mt19937_64 rng(9);
  const Image a = random_image(rng, 32, 32);
  Image b = a;
  std::normal_distribution<float> n(0.0f, 0.05f);
  for (float& v : b.values()) v = std::clamp(v + n(rng), 0.0f, 1.0f);
  const FloatRaster mask(32, 32, 1, 1.0f);
  EXPECT_NEAR(masked_ssim(a, a, mask), 1.0, 1e-12);
  const double ab = masked_ssim(a, b, mask);
  EXPECT_EQ(ab, masked_ssim(b, a, mask));
  EXPECT_LT(ab, 1.0);
  EXPECT_GT(ab, 0.0);
}

TEST(Ssim, WindowsMustLieInsideMask) {
  std::mt19937_64 rng(10);
  const Image a = random_image(rng, 32, 32);
  Image b = a;
  // Corrupt a corner that no full window can touch once it is masked out.
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) b.at(x, y, 0) = 1.0f - a.at(x, y, 0);
  }
  FloatRaster mask(32, 32, 1, 1.0f);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) mask.at(x, y) = 0.0f;
  }
  EXPECT_NEAR(masked_ssim(a, b, mask), 1.0, 1e-12);
  EXPECT_LT(masked_ssim(a, b, FloatRaster(32, 32, 1, 1.0f)), 1.0);
}

TEST(Ssim, SmallMaskFallsBackToGlobalWindow) {
  std::mt19937_64 rng(11);
  const Image a = random_image(rng, 8, 8);
  FloatRaster mask(8, 8, 1, 1.0f);
  EXPECT_NEAR(masked_ssim(a, a, mask), 1.0, 1e-12);
  Image b = a;
  for (float& v : b.values()) v = 0.5f * v;
  const double s = masked_ssim(a, b, mask);
  EXPECT_LT(s, 1.0);
  EXPECT_EQ(s, masked_ssim(b, a, mask));
}

TEST(Reprojection, IdentityScoresPerfectly) {
  std::mt19937_64 rng(12);
  const Image img = random_image(rng, 32, 32);
  CorrespondenceResult c{FloatRaster(32, 32, 2, 0.0f), FloatRaster(32, 32, 1, 1.0f)};
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      c.coords.at(x, y, 0) = static_cast<float>(x);
      c.coords.at(x, y, 1) = static_cast<float>(y);
    }
  }
  const ConfidenceMask mask = process_mask(c.confidence);
  const TextureReport r = reprojection_report(img, img, c, mask);
  EXPECT_EQ(r.psnr, kPsnrCap);
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
  EXPECT_EQ(r.valid_fraction, 1.0);
  EXPECT_EQ(r.valid_pixels, 32u * 32u);

  Image dimmer = img;
  for (float& v : dimmer.values()) v *= 0.8f;
  Image offset = dimmer;
  for (float& v : offset.values()) v += 0.1f;
  EXPECT_NEAR(reprojection_report(dimmer, offset, c, mask).psnr, 20.0, 0.01);
}

TEST(Reprojection, RejectsEmptyMask) {
  std::mt19937_64 rng(13);
  const Image img = random_image(rng, 8, 8);
  const CorrespondenceResult c{FloatRaster(8, 8, 2, 0.0f), FloatRaster(8, 8, 1, 0.0f)};
  EXPECT_THROW(reprojection_report(img, img, c, process_mask(c.confidence)), ValidationError);
}
