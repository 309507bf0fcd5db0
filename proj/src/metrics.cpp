#include "blocks/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "blocks/errors.hpp"

namespace bw {

namespace {

void require_same_shape(const FloatRaster& a, const FloatRaster& b,
                        const char* what) {
  if (!a.same_shape(b)) throw ValidationError(std::string(what) + " resolution mismatch");
}

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> gaussian_kernel() {
  std::array<double, 2 * kSsimRadius + 1> k{};
  double sum = 0.0;
  for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
    k[i + kSsimRadius] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i + kSsimRadius];
  }
  for (double& v : k) v /= sum;
  return k;
}

double ssim_term(double mu_a, double mu_b, double var_a, double var_b, double cov) {
  return ((2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
}

// Gaussian-weighted moments of the window centered at (x, y), valid only when
// the window lies inside the image.
struct Moments {
  double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
};

}  // namespace

BinaryMask depth_valid_mask(const DepthMap& pred, const DepthMap& gt) {
  require_same_shape(pred, gt, "depth");
  BinaryMask out(pred.width(), pred.height(), 1, 0);
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      out.at(x, y) = pred.at(x, y) > 0.0f && gt.at(x, y) > 0.0f ? 1 : 0;
    }
  }
  return out;
}

DepthAlignment align_depth(const DepthMap& pred, const DepthMap& gt,
                           const BinaryMask& valid) {
  require_same_shape(pred, gt, "depth");
  if (!valid.same_shape(pred)) throw ValidationError("valid mask resolution mismatch");
  std::vector<std::pair<long double, long double>> pairs;
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const float p = pred.at(x, y);
      const float g = gt.at(x, y);
      if (!std::isfinite(p) || !std::isfinite(g)) {
        throw ValidationError("non-finite depth on a valid pixel");
      }
      pairs.emplace_back(p, g);
    }
  }
  if (pairs.size() < 2) throw ValidationError("alignment needs at least two valid pixels");

  const long double n = static_cast<long double>(pairs.size());
  long double mean_p = 0, mean_g = 0;
  for (const auto& [p, g] : pairs) {
    mean_p += p;
    mean_g += g;
  }
  mean_p /= n;
  mean_g /= n;
  long double spp = 0, spg = 0, sgg = 0;
  for (const auto& [p, g] : pairs) {
    spp += (p - mean_p) * (p - mean_p);
    spg += (p - mean_p) * (g - mean_g);
    sgg += (g - mean_g) * (g - mean_g);
  }
  if (sgg == 0) throw ValidationError("ground-truth depth is constant over the valid set");

  DepthAlignment out;
  out.count = pairs.size();
  long double s = 0, t = mean_g;
  if (spp == 0) {
    out.degenerate = true;
  } else {
    s = spg / spp;
    t = mean_g - s * mean_p;
  }
  long double sq = 0;
  for (const auto& [p, g] : pairs) {
    const long double r = s * p + t - g;
    sq += r * r;
  }
  out.scale = static_cast<double>(s);
  out.shift = static_cast<double>(t);
  out.residual = static_cast<double>(sq / n);
  return out;
}

double absrel(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid) {
  require_same_shape(pred, gt, "depth");
  if (!valid.same_shape(pred)) throw ValidationError("valid mask resolution mismatch");
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (valid.at(x, y) && !(gt.at(x, y) > 0.0f)) {
        throw ValidationError("ground-truth depth must be positive on valid pixels");
      }
    }
  }
  const DepthAlignment a = align_depth(pred, gt, valid);
  // Recompute the fit in extended precision; a.scale and a.shift are rounded.
  long double mean_p = 0, mean_g = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!valid.at(x, y)) continue;
      mean_p += pred.at(x, y);
      mean_g += gt.at(x, y);
    }
  }
  const long double n = static_cast<long double>(a.count);
  mean_p /= n;
  mean_g /= n;
  long double spp = 0, spg = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const long double dp = pred.at(x, y) - mean_p;
      spp += dp * dp;
      spg += dp * (gt.at(x, y) - mean_g);
    }
  }
  const long double s = a.degenerate ? 0 : spg / spp;
  const long double t = mean_g - s * mean_p;

  double sum = 0.0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const double aligned = static_cast<double>(s * pred.at(x, y) + t);
      const double g = gt.at(x, y);
      sum += std::abs(aligned - g) / g;
    }
  }
  return sum / static_cast<double>(a.count);
}

double masked_psnr(const FloatRaster& a, const FloatRaster& b,
                   const FloatRaster& mask) {
  require_same_shape(a, b, "image");
  require_same_shape(a, mask, "mask");
  if (a.channels() != b.channels()) throw ValidationError("image channel mismatch");
  double sq = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!(mask.at(x, y) > 0.5f)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sq += d * d;
        ++count;
      }
    }
  }
  if (count == 0) throw ValidationError("mask selects no pixels");
  const double mse = sq / static_cast<double>(count);
  if (!std::isfinite(mse)) throw NumericalError("non-finite image values");
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double masked_ssim(const FloatRaster& a, const FloatRaster& b,
                   const FloatRaster& mask) {
  require_same_shape(a, b, "image");
  require_same_shape(a, mask, "mask");
  if (a.channels() != b.channels()) throw ValidationError("image channel mismatch");
  const int w = a.width();
  const int h = a.height();
  const int ch = a.channels();

  // Integral image of mask membership to test whole windows in O(1).
  std::vector<int> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  std::size_t masked = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int in = mask.at(x, y) > 0.5f ? 1 : 0;
      masked += in;
      integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          in + integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
          integral[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
          integral[static_cast<std::size_t>(y) * (w + 1) + x];
    }
  }
  if (masked == 0) throw ValidationError("mask selects no pixels");
  const int side = 2 * kSsimRadius + 1;
  auto window_full = [&](int cx, int cy) {
    const int x0 = cx - kSsimRadius, y0 = cy - kSsimRadius;
    const int x1 = x0 + side, y1 = y0 + side;
    if (x0 < 0 || y0 < 0 || x1 > w || y1 > h) return false;
    const auto at = [&](int x, int y) {
      return integral[static_cast<std::size_t>(y) * (w + 1) + x];
    };
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0) == side * side;
  };

  const auto kernel = gaussian_kernel();
  double total = 0.0;
  std::size_t windows = 0;
  std::vector<Moments> row(static_cast<std::size_t>(w));
  for (int c = 0; c < ch; ++c) {
    for (int cy = kSsimRadius; cy + kSsimRadius < h; ++cy) {
      // Vertical pass for this output row, then horizontal per window.
      for (int x = 0; x < w; ++x) {
        Moments m;
        for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
          const double wk = kernel[k + kSsimRadius];
          const double va = a.at(x, cy + k, c);
          const double vb = b.at(x, cy + k, c);
          m.mu_a += wk * va;
          m.mu_b += wk * vb;
          m.aa += wk * va * va;
          m.bb += wk * vb * vb;
          m.ab += wk * (va * vb);
        }
        row[x] = m;
      }
      for (int cx = kSsimRadius; cx + kSsimRadius < w; ++cx) {
        if (!window_full(cx, cy)) continue;
        Moments m;
        for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
          const double wk = kernel[k + kSsimRadius];
          const Moments& r = row[cx + k];
          m.mu_a += wk * r.mu_a;
          m.mu_b += wk * r.mu_b;
          m.aa += wk * r.aa;
          m.bb += wk * r.bb;
          m.ab += wk * r.ab;
        }
        total += ssim_term(m.mu_a, m.mu_b, m.aa - m.mu_a * m.mu_a,
                           m.bb - m.mu_b * m.mu_b, m.ab - m.mu_a * m.mu_b);
        ++windows;
      }
    }
  }
  if (windows > 0) return total / static_cast<double>(windows);

  // Fallback: one uniform window over all masked pixels, per channel.
  double sum = 0.0;
  for (int c = 0; c < ch; ++c) {
    double ma = 0, mb = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (mask.at(x, y) > 0.5f) {
          ma += a.at(x, y, c);
          mb += b.at(x, y, c);
        }
      }
    }
    ma /= static_cast<double>(masked);
    mb /= static_cast<double>(masked);
    double va = 0, vb = 0, cov = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (mask.at(x, y) > 0.5f) {
          const double da = a.at(x, y, c) - ma;
          const double db = b.at(x, y, c) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      }
    }
    const double n = static_cast<double>(masked);
    sum += ssim_term(ma, mb, va / n, vb / n, cov / n);
  }
  return sum / ch;
}

TextureReport reprojection_report(const FloatRaster& img_src,
                                  const FloatRaster& img_dst,
                                  const CorrespondenceResult& corr,
                                  const ConfidenceMask& mask,
                                  double skip_below) {
  require_same_shape(img_src, img_dst, "image");
  if (img_src.channels() != img_dst.channels()) {
    throw ValidationError("image channel mismatch");
  }
  if (!mask.values.same_shape(corr.confidence)) {
    throw ValidationError("mask resolution differs from the correspondence");
  }
  const Raster<std::uint8_t> no_skip(corr.width(), corr.height(), 1, 0);
  const FloatRaster warped = generate_hint(img_dst, corr, no_skip, skip_below);

  // Pixels the warp left black are excluded along with mask = 0.
  FloatRaster eval_mask(corr.width(), corr.height(), 1, 0.0f);
  for (int y = 0; y < corr.height(); ++y) {
    for (int x = 0; x < corr.width(); ++x) {
      const bool on = mask.values.at(x, y) > 0.5f && corr.confidence.at(x, y) >= skip_below;
      eval_mask.at(x, y) = on ? 1.0f : 0.0f;
    }
  }
  const FloatRaster full = upsample_nearest(eval_mask, img_src.width(), img_src.height());
  TextureReport report;
  for (float v : full.values()) report.valid_pixels += v > 0.5f ? 1 : 0;
  if (report.valid_pixels == 0) throw ValidationError("reprojection mask is empty");
  report.valid_fraction =
      static_cast<double>(report.valid_pixels) / static_cast<double>(full.pixel_count());
  report.psnr = masked_psnr(img_src, warped, full);
  report.ssim = masked_ssim(img_src, warped, full);
  return report;
}

}  // namespace bw
