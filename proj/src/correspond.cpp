#include "blocks/correspond.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "blocks/errors.hpp"
#include "blocks/kdtree.hpp"
#include "blocks/parallel.hpp"

namespace bw {

namespace {

KdPoint<3> point_at(const FloatRaster& points, int x, int y) {
  return {points.at(x, y, 0), points.at(x, y, 1), points.at(x, y, 2)};
}

// Row-major pixel lists per primitive id.
std::map<int, std::vector<int>> group_pixels(const IdRaster& map) {
  std::map<int, std::vector<int>> groups;
  const int w = map.width();
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < w; ++x) groups[map.at(x, y)].push_back(y * w + x);
  }
  return groups;
}

}  // namespace

CorrespondenceResult correspond(const RenderProduct& src,
                                const RenderProduct& dst,
                                const TransformMap& transforms,
                                std::span<const Vec3> centers,
                                double max_distance) {
  if (!src.convex_map.same_shape(dst.convex_map) ||
      !src.points.same_shape(src.convex_map) ||
      !dst.points.same_shape(dst.convex_map)) {
    throw ValidationError("source and edited renders differ in resolution");
  }
  if (!(max_distance > 0.0)) throw ValidationError("max_distance must be positive");

  const int w = dst.convex_map.width();
  const int h = dst.convex_map.height();
  CorrespondenceResult out{FloatRaster(w, h, 2, 0.0f), FloatRaster(w, h, 1, 0.0f)};

  const auto src_groups = group_pixels(src.convex_map);
  const auto dst_groups = group_pixels(dst.convex_map);
  const int n_centers = static_cast<int>(centers.size());

  for (const auto& [id, src_pixels] : src_groups) {
    if (id < 0 || id >= n_centers) continue;
    const auto dst_it = dst_groups.find(id);
    if (dst_it == dst_groups.end()) continue;
    const auto& dst_pixels = dst_it->second;

    std::vector<KdPoint<3>> cloud;
    cloud.reserve(src_pixels.size());
    for (int idx : src_pixels) cloud.push_back(point_at(src.points, idx % w, idx / w));
    const KdTree<3> tree(std::move(cloud));

    const auto t_it = transforms.find(id);
    const PrimitiveTransform* t = t_it == transforms.end() ? nullptr : &t_it->second;
    const Vec3 center = centers[id];

    parallel_chunks(dst_pixels.size(), 512,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t j = begin; j < end; ++j) {
        const int x2 = dst_pixels[j] % w;
        const int y2 = dst_pixels[j] / w;
        KdPoint<3> q = point_at(dst.points, x2, y2);
        if (t) {
          const Vec3 p = apply_transform_inverse(Vec3(q[0], q[1], q[2]), center, *t);
          q = {p.x(), p.y(), p.z()};
        }
        const auto nn = tree.nearest(q);
        const double d_min = std::sqrt(nn.squared_distance);
        if (d_min <= max_distance) {
          const int src_idx = src_pixels[nn.index];
          out.coords.at(x2, y2, 0) = static_cast<float>(src_idx % w);
          out.coords.at(x2, y2, 1) = static_cast<float>(src_idx / w);
          out.confidence.at(x2, y2) =
              static_cast<float>(1.0 - std::min(d_min / max_distance, 1.0));
        }
      }
    });
  }
  return out;
}

IdRaster exclude_primitives(const IdRaster& map, const std::set<int>& ids) {
  IdRaster out = map;
  if (ids.empty()) return out;
  for (auto& v : out.values()) {
    if (ids.contains(v)) v = -1;
  }
  return out;
}

CorrespondenceResult correspond_edit(const Scene& source,
                                     const TransformMap& transforms,
                                     const RenderProduct& src,
                                     const RenderProduct& dst,
                                     double max_distance) {
  std::set<int> deleted;
  TransformMap moving;
  for (const auto& [id, t] : transforms) {
    if (t.remove) {
      deleted.insert(id);
    } else if (!t.empty()) {
      moving.emplace(id, t);
    }
  }
  for (int i = 0; i < static_cast<int>(source.primitives.size()); ++i) {
    if (!source.primitives[i].live) deleted.insert(i);
  }
  std::vector<Vec3> centers;
  centers.reserve(source.primitives.size());
  for (const auto& p : source.primitives) centers.push_back(p.center);

  RenderProduct s = src;
  RenderProduct d = dst;
  s.convex_map = exclude_primitives(src.convex_map, deleted);
  d.convex_map = exclude_primitives(dst.convex_map, deleted);
  return correspond(s, d, moving, centers, max_distance);
}

CorrespondenceResult correspond_reverse(const Scene& source,
                                        const TransformMap& transforms,
                                        const RenderProduct& src,
                                        const RenderProduct& dst,
                                        double max_distance) {
  std::set<int> deleted;
  TransformMap inverse;
  std::vector<Vec3> centers;
  centers.reserve(source.primitives.size());
  for (const auto& p : source.primitives) centers.push_back(p.center);
  for (const auto& [id, t] : transforms) {
    if (t.remove) {
      deleted.insert(id);
      continue;
    }
    if (t.empty() || id < 0 || id >= static_cast<int>(centers.size())) continue;
    Vec3 moved;
    inverse.emplace(id, invert_transform(t, centers[id], &moved));
    centers[id] = moved;
  }
  for (int i = 0; i < static_cast<int>(source.primitives.size()); ++i) {
    if (!source.primitives[i].live) deleted.insert(i);
  }
  RenderProduct s = src;
  RenderProduct d = dst;
  s.convex_map = exclude_primitives(src.convex_map, deleted);
  d.convex_map = exclude_primitives(dst.convex_map, deleted);
  // Source-view pixels query the edited cloud.
  return correspond(d, s, inverse, centers, max_distance);
}

}  // namespace bw
