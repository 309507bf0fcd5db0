#pragma once

#include <cstddef>
#include <cstdint>

#include "blocks/camera.hpp"
#include "blocks/correspond.hpp"
#include "blocks/hint.hpp"
#include "blocks/raster.hpp"

namespace bw {

using BinaryMask = Raster<std::uint8_t>;

/// Least-squares (scale, shift) taking pred onto gt over valid pixels.
struct DepthAlignment {
  double scale = 1.0;
  double shift = 0.0;
  double residual = 0.0;  // mean squared error after alignment
  std::size_t count = 0;
  /// Prediction constant over the valid set; scale forced to 0.
  bool degenerate = false;
};

/// Pixels where both maps are positive.
BinaryMask depth_valid_mask(const DepthMap& pred, const DepthMap& gt);

/// Closed-form normal equations, accumulated in extended precision. Throws
/// ValidationError with fewer than two valid pixels or constant gt.
DepthAlignment align_depth(const DepthMap& pred, const DepthMap& gt,
                           const BinaryMask& valid);

/// mean |s * pred + t - gt| / gt over valid pixels after align_depth.
double absrel(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid);

inline constexpr double kPsnrCap = 99.0;

/// Peak 1.0, over pixels with mask > 0.5 and all channels; capped at 99 dB.
double masked_psnr(const FloatRaster& a, const FloatRaster& b,
                   const FloatRaster& mask);

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03,
/// peak 1.0) over pixels whose whole window lies inside the image and the
/// mask. When no window fits, a single uniform-weight window over the masked
/// pixels is used instead.
double masked_ssim(const FloatRaster& a, const FloatRaster& b,
                   const FloatRaster& mask);

struct TextureReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double valid_fraction = 0.0;
  std::size_t valid_pixels = 0;
};

/// Warps img_dst into the source frame through `corr` (a correspondence of
/// source-frame pixels to img_dst pixel coordinates) with the hint warp, then
/// scores it against img_src on the pixels where `mask` is 1. The mask is at
/// the correspondence resolution and is upsampled to the image resolution.
/// Throws ValidationError when the mask is empty.
TextureReport reprojection_report(const FloatRaster& img_src,
                                  const FloatRaster& img_dst,
                                  const CorrespondenceResult& corr,
                                  const ConfidenceMask& mask,
                                  double skip_below = kHintSkipThreshold);

}  // namespace bw
