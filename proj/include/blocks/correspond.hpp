#pragma once

#include <set>
#include <span>

#include "blocks/edit.hpp"
#include "blocks/raster.hpp"
#include "blocks/render.hpp"

namespace bw {

inline constexpr double kDefaultMaxDistance = 0.005;

/// coords: 2 channels (x, y) of the matched source pixel; confidence in
/// [0, 1]. Pixels without a match hold (0, 0) and confidence 0.
struct CorrespondenceResult {
  FloatRaster coords;
  FloatRaster confidence;

  int width() const { return confidence.width(); }
  int height() const { return confidence.height(); }
  bool operator==(const CorrespondenceResult&) const = default;
};

/// For every primitive id present in both convex maps (and within
/// [0, centers.size())), matches each dst pixel's 3D point (pulled back
/// through apply_transform_inverse when the id has a transform) to the
/// nearest src point of the same primitive. Matches within max_distance
/// record the src pixel and confidence 1 - min(d / max_distance, 1).
/// Equidistant candidates resolve to the lowest linear src pixel index.
/// Throws ValidationError on resolution mismatch or max_distance <= 0.
CorrespondenceResult correspond(const RenderProduct& src,
                                const RenderProduct& dst,
                                const TransformMap& transforms,
                                std::span<const Vec3> centers,
                                double max_distance = kDefaultMaxDistance);

/// Copy of `map` with the listed ids replaced by -1.
IdRaster exclude_primitives(const IdRaster& map, const std::set<int>& ids);

/// Correspondence for an edit of `source`: centers come from the source
/// scene, deleted primitives are removed from both maps, and deletion records
/// are dropped from the transform map.
CorrespondenceResult correspond_edit(const Scene& source,
                                     const TransformMap& transforms,
                                     const RenderProduct& src,
                                     const RenderProduct& dst,
                                     double max_distance = kDefaultMaxDistance);

/// Correspondence in the reverse direction of an edit: for every pixel of
/// the source view, the matching pixel of the edited view.
CorrespondenceResult correspond_reverse(const Scene& source,
                                        const TransformMap& transforms,
                                        const RenderProduct& src,
                                        const RenderProduct& dst,
                                        double max_distance = kDefaultMaxDistance);

}  // namespace bw
