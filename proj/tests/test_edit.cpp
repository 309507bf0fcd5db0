#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "blocks/edit.hpp"
#include "blocks/errors.hpp"
#include "synthetic.hpp"

using namespace bw;
using namespace bw::testing;

namespace {

Scene two_box_scene() {
  return box_scene({{Vec3(-0.6, -0.3, 2.5), Vec3(-0.1, 0.3, 3.0)},
                    {Vec3(0.1, -0.4, 2.0), Vec3(0.5, 0.1, 2.6)}},
                   square_camera(16));
}

PrimitiveTransform random_transform(std::mt19937_64& rng, int id) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PrimitiveTransform t;
  t.primitive_id = id;
  t.translation = Vec3(u(rng), u(rng), u(rng));
  t.rotation_y = 3.0 * u(rng);
  t.scale = std::exp(0.5 * u(rng));
  return t;
}

}  // namespace

TEST(Edit, EmptyTransformIsIdentity) {
  const Vec3 p(0.3, -1.2, 2.5);
  EXPECT_LT((apply_transform_inverse(p, Vec3(1, 2, 3), {}) - p).norm(), 1e-15);
}

TEST(Edit, TranslationIgnoresCenter) {
  PrimitiveTransform t;
  t.translation = Vec3(1, 0, 0);
  const Vec3 p(0.25, 0.5, -2.0);
  for (const Vec3& c : {Vec3::Zero().eval(), Vec3(3, -4, 5)}) {
    const Vec3 q = apply_transform_inverse(p, c, t);
    EXPECT_NEAR((q - (p - Vec3(1, 0, 0))).norm(), 0.0, 1e-15);
  }
}

TEST(Edit, QuarterTurnInverse) {
  PrimitiveTransform t;
  t.rotation_y = std::numbers::pi / 2;
  const Vec3 q = apply_transform_inverse(Vec3(1, 0, 0), Vec3::Zero(), t);
  EXPECT_NEAR(q.x(), 0.0, 1e-15);
  EXPECT_NEAR(q.y(), 0.0, 1e-15);
  EXPECT_NEAR(q.z(), -1.0, 1e-15);
}

TEST(Edit, InverseOrderIsTranslateRotateScale) {
  PrimitiveTransform t;
  t.translation = Vec3(0.5, 0, 0);
  t.rotation_y = std::numbers::pi / 2;
  t.scale = 2.0;
  // (2.5, 0, 0) - center 1 -> (1.5,0,0) - t -> (1,0,0) -> rot(-pi/2) -> (0,0,-1)
  // -> /2 -> (0,0,-0.5) + center.
  const Vec3 q = apply_transform_inverse(Vec3(2.5, 0, 0), Vec3(1, 0, 0), t);
  EXPECT_NEAR((q - Vec3(1, 0, -0.5)).norm(), 0.0, 1e-15);
}

TEST(Edit, ForwardInverseRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const PrimitiveTransform t = random_transform(rng, 0);
    const Vec3 c(u(rng), u(rng), u(rng));
    const Vec3 x(u(rng), u(rng), u(rng));
    const Vec3 y = apply_transform_forward(x, c, t);
    EXPECT_LT((apply_transform_inverse(y, c, t) - x).norm(), 1e-12);
  }
}

TEST(Edit, InvertTransformUndoesForwardMap) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const PrimitiveTransform t = random_transform(rng, 0);
    const Vec3 c(u(rng), u(rng), u(rng));
    Vec3 moved;
    const PrimitiveTransform inv = invert_transform(t, c, &moved);
    EXPECT_LT((moved - (c + *t.translation)).norm(), 1e-12);
    const Vec3 x(u(rng), u(rng), u(rng));
    const Vec3 back = apply_transform_forward(apply_transform_forward(x, c, t), moved, inv);
    EXPECT_LT((back - x).norm(), 1e-11);
  }
}

TEST(Edit, InverseRejectsBadRecords) {
  PrimitiveTransform t;
  t.scale = 0.0;
  EXPECT_THROW(apply_transform_inverse(Vec3::Zero(), Vec3::Zero(), t), ValidationError);
  t.scale = -1.0;
  EXPECT_THROW(apply_transform_inverse(Vec3::Zero(), Vec3::Zero(), t), ValidationError);
  PrimitiveTransform del;
  del.remove = true;
  EXPECT_THROW(apply_transform_inverse(Vec3::Zero(), Vec3::Zero(), del), ValidationError);
}

TEST(Edit, ComposeSumsAndMultiplies) {
  PrimitiveTransform a;
  a.primitive_id = 1;
  a.translation = Vec3(1, 0, 0);
  a.rotation_y = 0.25;
  a.scale = 2.0;
  PrimitiveTransform b;
  b.primitive_id = 1;
  b.translation = Vec3(0, 2, 0);
  b.rotation_y = 0.5;
  b.scale = 1.5;
  const PrimitiveTransform c = compose_transforms(a, b);
  EXPECT_EQ(*c.translation, Vec3(1, 2, 0));
  EXPECT_DOUBLE_EQ(*c.rotation_y, 0.75);
  EXPECT_DOUBLE_EQ(*c.scale, 3.0);
  EXPECT_FALSE(c.remove);
  PrimitiveTransform d;
  d.primitive_id = 1;
  d.remove = true;
  EXPECT_TRUE(compose_transforms(c, d).remove);
  EXPECT_TRUE(compose_transforms(compose_transforms(c, d), b).remove);
}

TEST(Edit, ComposeIsExactForCommutingTranslations) {
  const Scene s = two_box_scene();
  PrimitiveTransform a;
  a.primitive_id = 0;
  a.translation = Vec3(0.1, 0, 0);
  PrimitiveTransform b = a;
  b.translation = Vec3(0, -0.2, 0.05);
  const ConvexPrimitive twice =
      transform_primitive(transform_primitive(s.primitives[0], a), b);
  const ConvexPrimitive once = transform_primitive(s.primitives[0], compose_transforms(a, b));
  for (std::size_t h = 0; h < once.planes.size(); ++h) {
    EXPECT_LT((once.planes[h].normal - twice.planes[h].normal).norm(), 1e-12);
    EXPECT_NEAR(once.planes[h].offset, twice.planes[h].offset, 1e-12);
  }
}

TEST(Edit, TransformPrimitiveMovesTheSolid) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ConvexPrimitive prim = box_primitive(Vec3(0.2, -0.1, 2.0), Vec3(0.3, 0.2, 0.25));
  for (int i = 0; i < 20; ++i) {
    const PrimitiveTransform t = random_transform(rng, 0);
    const ConvexPrimitive moved = transform_primitive(prim, t);
    EXPECT_LT((moved.center - apply_transform_forward(prim.center, prim.center, t)).norm(),
              1e-12);
    for (int j = 0; j < 50; ++j) {
      const Vec3 x = prim.center + 0.5 * Vec3(u(rng), u(rng), u(rng));
      const Vec3 y = apply_transform_forward(x, prim.center, t);
      // Plane distances scale with the uniform scale factor.
      for (std::size_t h = 0; h < prim.planes.size(); ++h) {
        EXPECT_NEAR(plane_distance(moved.planes[h], y),
                    *t.scale * plane_distance(prim.planes[h], x), 1e-10);
      }
    }
  }
}

TEST(Edit, CameraDeltaMovesCameraInItsOwnFrame) {
  RigidTransform delta;
  delta.translation = Vec3(0.1, 0, 0);
  const RigidTransform pose = move_camera(RigidTransform{}, delta);
  // A point 0.1 to the right of the old camera is straight ahead of the new one.
  const Vec3 p = pose.apply(Vec3(0.1, 0, 2));
  EXPECT_NEAR((p - Vec3(0, 0, 2)).norm(), 0.0, 1e-15);
}

TEST(Edit, CameraDeltasCompose) {
  RigidTransform pose;
  pose.rotation = rotation_y(0.3);
  pose.translation = Vec3(0.1, 0.2, 0.3);
  RigidTransform d1;
  d1.rotation = rotation_y(-0.2);
  d1.translation = Vec3(0.5, 0, 0);
  RigidTransform d2;
  d2.rotation = rotation_y(0.7);
  d2.translation = Vec3(0, 0.1, -0.4);
  const RigidTransform stepwise = move_camera(move_camera(pose, d1), d2);
  const RigidTransform combined = move_camera(pose, d1 * d2);
  EXPECT_LT((stepwise.rotation - combined.rotation).norm(), 1e-14);
  EXPECT_LT((stepwise.translation - combined.translation).norm(), 1e-14);
}

TEST(Edit, ValidateRejectsBadScripts) {
  Scene s = two_box_scene();
  EditScript unknown;
  unknown.edits.push_back({.primitive_id = 5});
  EXPECT_THROW(validate_edits(s, unknown), ValidationError);
  EditScript negative;
  negative.edits.push_back({.primitive_id = -1});
  EXPECT_THROW(validate_edits(s, negative), ValidationError);
  EditScript dup;
  dup.edits.push_back({.primitive_id = 0, .translation = Vec3(1, 0, 0)});
  dup.edits.push_back({.primitive_id = 0, .scale = 2.0});
  EXPECT_THROW(validate_edits(s, dup), ValidationError);
  EditScript bad_scale;
  bad_scale.edits.push_back({.primitive_id = 1, .scale = 0.0});
  EXPECT_THROW(validate_edits(s, bad_scale), ValidationError);
  EditScript nan;
  nan.edits.push_back({.primitive_id = 1, .rotation_y = std::nan("")});
  EXPECT_THROW(validate_edits(s, nan), ValidationError);
  s.primitives[1].live = false;
  EditScript dead;
  dead.edits.push_back({.primitive_id = 1, .translation = Vec3(0, 1, 0)});
  EXPECT_THROW(validate_edits(s, dead), ValidationError);
  EditScript ok;
  ok.edits.push_back({.primitive_id = 0, .rotation_y = 0.1});
  EXPECT_NO_THROW(validate_edits(s, ok));
}

TEST(Edit, ApplyEditsReconstructsEditedScene) {
  const Scene s = two_box_scene();
  EditScript script;
  script.edits.push_back({.primitive_id = 0, .translation = Vec3(0.2, 0, 0), .scale = 0.8});
  script.edits.push_back({.primitive_id = 1, .remove = true});
  RigidTransform delta;
  delta.translation = Vec3(0, 0, -0.5);
  script.camera_delta = delta;
  const Scene e = apply_edits(s, script);
  ASSERT_EQ(e.primitives.size(), s.primitives.size());
  EXPECT_FALSE(e.primitives[1].live);
  EXPECT_TRUE(e.primitives[0].live);
  EXPECT_EQ(e.primitives[0], transform_primitive(s.primitives[0], script.edits[0]));
  EXPECT_EQ(e.pose, move_camera(s.pose, delta));
  EXPECT_EQ(e.camera, s.camera);
  EXPECT_EQ(apply_edits(s, EditScript{}), s);
}

TEST(Edit, CollectTransformsMergesPerPrimitive) {
  EditScript script;
  script.edits.push_back({.primitive_id = 2, .translation = Vec3(1, 0, 0)});
  script.edits.push_back({.primitive_id = 0, .scale = 2.0});
  script.edits.push_back({.primitive_id = 2, .translation = Vec3(0, 1, 0)});
  const TransformMap m = collect_transforms(script);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(*m.at(2).translation, Vec3(1, 1, 0));
  EXPECT_EQ(*m.at(0).scale, 2.0);
}
