#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blocks/correspond.hpp"
#include "blocks/raster.hpp"

namespace bw {

/// Correspondences with confidence below this are not written to the hint.
inline constexpr double kHintSkipThreshold = 0.1;
/// Confidence threshold of the mask and of the inpainting valid set.
inline constexpr double kDefaultTau = 0.01;
inline constexpr int kDefaultDilatePx = 9;

/// Images are FloatRaster with 3 interleaved channels in [0, 1].
using Image = FloatRaster;

struct ConfidenceMask {
  FloatRaster values;
  /// Thresholded and dilated; values are exactly 0 or 1.
  bool processed = false;
};

/// Bilinear lookup of every channel at continuous (y, x). Coordinates are
/// clamped to [0, H - 1] x [0, W - 1]; integer coordinates return the stored
/// pixel exactly.
void bilinear_sample(const FloatRaster& img, double y, double x,
                     std::span<float> out);
std::vector<float> bilinear_sample(const FloatRaster& img, double y, double x);

/// Warps src_img through a correspondence at a resolution that divides the
/// image resolution by integer factors. Pixels flagged in skip_mask (value 1)
/// or with confidence below skip_below are left black. Throws
/// ValidationError for non-integer scale factors or mismatched rasters.
Image generate_hint(const Image& src_img, const CorrespondenceResult& corr,
                    const Raster<std::uint8_t>& skip_mask,
                    double skip_below = kHintSkipThreshold);

/// 1 where confidence >= tau, then every pixel within Chebyshev distance
/// dilate_px of a 0 pixel set to 0.
ConfidenceMask process_mask(const FloatRaster& confidence, double tau = kDefaultTau,
                            int dilate_px = kDefaultDilatePx);

/// Nearest-neighbour block upsampling by integer factors.
FloatRaster upsample_nearest(const FloatRaster& values, int width, int height);

/// Every pixel takes the colour of the Euclidean-nearest pixel with
/// confidence >= tau (ties to the lowest row-major index). Throws
/// ValidationError when no pixel qualifies.
Image voronoi_inpaint(const Image& hint, const FloatRaster& confidence,
                      double tau = kDefaultTau);

struct HintOptions {
  double tau = kDefaultTau;
  int dilate_px = kDefaultDilatePx;
  double skip_below = kHintSkipThreshold;
};

struct HintPackage {
  Image hint;            // raw warp
  Image inpainted;       // hint with mask = 0 pixels filled
  ConfidenceMask mask;   // processed, correspondence resolution
  FloatRaster mask_full; // processed, image resolution
};

/// generate_hint, process_mask and voronoi_inpaint in sequence. The
/// inpainting valid set is the processed mask, so inpainted equals hint
/// wherever the mask is 1.
HintPackage build_hint_package(const Image& src_img,
                               const CorrespondenceResult& corr,
                               const Raster<std::uint8_t>& skip_mask,
                               const HintOptions& opts = {});

/// skip_mask for generate_hint from an edited-view convex map: 1 on misses.
Raster<std::uint8_t> miss_mask(const IdRaster& convex_map);

}  // namespace bw
