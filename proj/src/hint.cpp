#include "blocks/hint.hpp"

#include <algorithm>
#include <cmath>

#include "blocks/errors.hpp"
#include "blocks/kdtree.hpp"
#include "blocks/parallel.hpp"

namespace bw {

namespace {

int integer_factor(int hi, int lo, const char* axis) {
  if (lo <= 0 || hi % lo != 0) {
    throw ValidationError(std::string("image ") + axis +
                          " is not an integer multiple of the correspondence " + axis);
  }
  return hi / lo;
}

}  // namespace

void bilinear_sample(const FloatRaster& img, double y, double x,
                     std::span<float> out) {
  if (img.empty()) throw ValidationError("cannot sample an empty image");
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double wx = x - x0;
  const double wy = y - y0;
  for (int c = 0; c < img.channels(); ++c) {
    const double top = img.at(x0, y0, c) * (1.0 - wx) + img.at(x1, y0, c) * wx;
    const double bot = img.at(x0, y1, c) * (1.0 - wx) + img.at(x1, y1, c) * wx;
    out[c] = static_cast<float>(top * (1.0 - wy) + bot * wy);
  }
}

std::vector<float> bilinear_sample(const FloatRaster& img, double y, double x) {
  std::vector<float> out(static_cast<std::size_t>(img.channels()));
  bilinear_sample(img, y, x, out);
  return out;
}

Image generate_hint(const Image& src_img, const CorrespondenceResult& corr,
                    const Raster<std::uint8_t>& skip_mask, double skip_below) {
  const int hr = corr.height();
  const int wr = corr.width();
  if (!corr.coords.same_shape(corr.confidence) || corr.coords.channels() != 2) {
    throw ValidationError("correspondence coords and confidence disagree");
  }
  if (!skip_mask.same_shape(corr.confidence)) {
    throw ValidationError("skip mask resolution differs from the correspondence");
  }
  const int hs = src_img.height();
  const int ws = src_img.width();
  const int lambda_h = integer_factor(hs, hr, "height");
  const int lambda_w = integer_factor(ws, wr, "width");

  Image out(ws, hs, src_img.channels(), 0.0f);
  // Output blocks are disjoint, so rows parallelize without synchronization.
  parallel_chunks(static_cast<std::size_t>(hr), 8,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (int y = static_cast<int>(begin); y < static_cast<int>(end); ++y) {
      for (int x = 0; x < wr; ++x) {
        if (skip_mask.at(x, y) == 1) continue;
        const double w = corr.confidence.at(x, y);
        if (w < skip_below) continue;
        const double xc = corr.coords.at(x, y, 0);
        const double yc = corr.coords.at(x, y, 1);
        const double y_src = yc * lambda_h;
        const double x_src = xc * lambda_w;
        const int y_start = y * lambda_h;
        const int y_end = (y + 1) * lambda_h;
        const int x_start = x * lambda_w;
        const int x_end = (x + 1) * lambda_w;
        for (int ys = y_start; ys < y_end; ++ys) {
          for (int xs = x_start; xs < x_end; ++xs) {
            if (ys < 0 || ys >= hs || xs < 0 || xs >= ws) continue;
            const double ay = static_cast<double>(ys - y_start) /
                              std::max(y_end - y_start, 1);
            const double ax = static_cast<double>(xs - x_start) /
                              std::max(x_end - x_start, 1);
            bilinear_sample(src_img, y_src + ay * lambda_h, x_src + ax * lambda_w,
                            out.pixel(xs, ys));
          }
        }
      }
    }
  });
  return out;
}

ConfidenceMask process_mask(const FloatRaster& confidence, double tau,
                            int dilate_px) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (dilate_px < 0) throw ValidationError("dilation radius must be non-negative");
  const int w = confidence.width();
  const int h = confidence.height();
  // zero[i] = 1 where the thresholded mask is 0.
  std::vector<int> zero(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      zero[static_cast<std::size_t>(y) * w + x] = confidence.at(x, y) >= tau ? 0 : 1;
    }
  }
  // Square dilation of the zero set as two 1D sliding-window passes.
  auto dilate_1d = [dilate_px](const int* in, int* out, int n, int stride) {
    int count = 0;
    for (int i = 0; i < std::min(dilate_px, n); ++i) count += in[i * stride];
    for (int i = 0; i < n; ++i) {
      const int add = i + dilate_px;
      if (add < n) count += in[add * stride];
      const int drop = i - dilate_px - 1;
      if (drop >= 0) count -= in[drop * stride];
      out[i * stride] = count > 0 ? 1 : 0;
    }
  };
  std::vector<int> tmp(zero.size());
  for (int y = 0; y < h; ++y) {
    dilate_1d(zero.data() + static_cast<std::size_t>(y) * w,
              tmp.data() + static_cast<std::size_t>(y) * w, w, 1);
  }
  for (int x = 0; x < w; ++x) dilate_1d(tmp.data() + x, zero.data() + x, h, w);

  ConfidenceMask mask{FloatRaster(w, h, 1, 0.0f), true};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mask.values.at(x, y) = zero[static_cast<std::size_t>(y) * w + x] ? 0.0f : 1.0f;
    }
  }
  return mask;
}

FloatRaster upsample_nearest(const FloatRaster& values, int width, int height) {
  const int fy = integer_factor(height, values.height(), "height");
  const int fx = integer_factor(width, values.width(), "width");
  FloatRaster out(width, height, values.channels(), 0.0f);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < values.channels(); ++c) {
        out.at(x, y, c) = values.at(x / fx, y / fy, c);
      }
    }
  }
  return out;
}

Image voronoi_inpaint(const Image& hint, const FloatRaster& confidence,
                      double tau) {
  if (!hint.same_shape(confidence)) {
    throw ValidationError("confidence resolution differs from the hint");
  }
  const int w = hint.width();
  const int h = hint.height();
  std::vector<KdPoint<2>> sites;
  std::vector<int> site_pixel;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (confidence.at(x, y) >= tau) {
        sites.push_back({static_cast<double>(y), static_cast<double>(x)});
        site_pixel.push_back(y * w + x);
      }
    }
  }
  if (sites.empty()) throw ValidationError("no pixel reaches the confidence threshold");
  const KdTree<2> tree(std::move(sites));

  Image out(w, h, hint.channels(), 0.0f);
  parallel_chunks(static_cast<std::size_t>(h), 8,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
    for (int y = static_cast<int>(begin); y < static_cast<int>(end); ++y) {
      for (int x = 0; x < w; ++x) {
        int src = y * w + x;
        if (!(confidence.at(x, y) >= tau)) {
          src = site_pixel[tree.nearest({static_cast<double>(y), static_cast<double>(x)}).index];
        }
        const auto from = hint.pixel(src % w, src / w);
        std::copy(from.begin(), from.end(), out.pixel(x, y).begin());
      }
    }
  });
  return out;
}

HintPackage build_hint_package(const Image& src_img,
                               const CorrespondenceResult& corr,
                               const Raster<std::uint8_t>& skip_mask,
                               const HintOptions& opts) {
  HintPackage pkg;
  pkg.hint = generate_hint(src_img, corr, skip_mask, opts.skip_below);
  pkg.mask = process_mask(corr.confidence, opts.tau, opts.dilate_px);
  pkg.mask_full = upsample_nearest(pkg.mask.values, src_img.width(), src_img.height());
  pkg.inpainted = voronoi_inpaint(pkg.hint, pkg.mask_full, opts.tau);
  return pkg;
}

Raster<std::uint8_t> miss_mask(const IdRaster& convex_map) {
  Raster<std::uint8_t> out(convex_map.width(), convex_map.height(), 1, 0);
  for (int y = 0; y < convex_map.height(); ++y) {
    for (int x = 0; x < convex_map.width(); ++x) {
      out.at(x, y) = convex_map.at(x, y) < 0 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace bw
