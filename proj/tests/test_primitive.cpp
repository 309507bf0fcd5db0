#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blocks/errors.hpp"
#include "blocks/primitive.hpp"

using namespace bw;

namespace {

ConvexPrimitive unit_cube(double delta = kDefaultDelta, double sigma = kDefaultSigma) {
  return box_primitive(Vec3::Zero(), Vec3::Constant(0.5), delta, sigma);
}

Vec3 random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

double hard_max(const ConvexPrimitive& p, const Vec3& x) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& h : p.planes) m = std::max(m, plane_distance(h, x));
  return m;
}

}  // namespace

TEST(HalfPlane, SignConvention) {
  const HalfPlane h{Vec3::UnitX(), -1.0};
  EXPECT_DOUBLE_EQ(plane_distance(h, Vec3(3, 0, 0)), 2.0);
  EXPECT_DOUBLE_EQ(plane_distance(h, Vec3(0, 5, 5)), -1.0);
  EXPECT_DOUBLE_EQ(plane_distance(h, Vec3(1, 7, -2)), 0.0);
}

TEST(SmoothSdf, BracketsHardMax) {
  const ConvexPrimitive cube = unit_cube();
  const double slack = std::log(static_cast<double>(cube.face_count())) / cube.delta;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 x = random_point(rng, 1.5);
    const double m = hard_max(cube, x);
    const double phi = smooth_sdf(cube, x) / cube.delta;
    EXPECT_GE(phi, m - 1e-12);
    EXPECT_LE(phi, m + slack + 1e-12);
  }
}

TEST(SmoothSdf, NoOverflowForLargeArguments) {
  // |delta * H| reaches 1e4 at these points.
  const ConvexPrimitive cube = unit_cube(100.0);
  const double far = smooth_sdf(cube, Vec3(100.5, 0, 0));
  const double deep = smooth_sdf(box_primitive(Vec3::Zero(), Vec3::Constant(100.0), 100.0),
                                 Vec3::Zero());
  EXPECT_TRUE(std::isfinite(far));
  EXPECT_TRUE(std::isfinite(deep));
  EXPECT_NEAR(far / 100.0, 100.0, 1e-9);
  EXPECT_NEAR(deep / 100.0, -100.0, 0.05);
}

TEST(SmoothSdf, SoftmaxWeightsSumToOne) {
  const ConvexPrimitive cube = unit_cube(10.0);
  std::vector<double> w(cube.face_count());
  smooth_sdf(cube, Vec3(0.3, -0.2, 0.45), w);
  double sum = 0.0;
  for (double v : w) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(NormalizedSdf, IsOneLipschitz) {
  const ConvexPrimitive cube = unit_cube();
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a = random_point(rng, 2.0);
    const Vec3 b = random_point(rng, 2.0);
    const double lhs = std::abs(normalized_sdf(cube, a) - normalized_sdf(cube, b));
    EXPECT_LE(lhs, (a - b).norm() + 1e-12);
  }
}

TEST(Indicator, MonotoneInPhiAndBounded) {
  double prev = 1.0;
  // sigma * phi spans [-30, 30], where the sigmoid is not yet saturated.
  for (double x = -30.0; x <= 30.0; x += 0.25) {
    const double c = indicator_from_phi(kDefaultSigma, x / kDefaultSigma);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_LT(c, prev);
    prev = c;
  }
  EXPECT_DOUBLE_EQ(indicator_from_phi(3.0, 0.0), 0.5);
  EXPECT_EQ(indicator_from_phi(10.0, 1e6), 0.0);
  EXPECT_EQ(indicator_from_phi(10.0, -1e6), 1.0);
}

TEST(Indicator, InsideAboveHalfOutsideBelow) {
  const ConvexPrimitive cube = unit_cube();
  EXPECT_GT(indicator(cube, Vec3::Zero()), 0.99);
  EXPECT_LT(indicator(cube, Vec3(0.7, 0, 0)), 0.01);
}

TEST(Gradients, SmoothSdfMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  ConvexPrimitive prim = unit_cube(10.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 x = random_point(rng, 0.8);
    const auto grad = smooth_sdf_gradient(prim, x);
    const auto igrad = indicator_gradient(prim, x);
    for (int h = 0; h < prim.face_count(); ++h) {
      for (int k = 0; k < 4; ++k) {
        const double step = 1e-6;
        ConvexPrimitive plus = prim, minus = prim;
        if (k < 3) {
          plus.planes[h].normal[k] += step;
          minus.planes[h].normal[k] -= step;
        } else {
          plus.planes[h].offset += step;
          minus.planes[h].offset -= step;
        }
        const double fd = (smooth_sdf(plus, x) - smooth_sdf(minus, x)) / (2 * step);
        EXPECT_NEAR(grad[h][k], fd, 1e-6 * std::max(1.0, std::abs(fd)));
        const double ifd = (indicator(plus, x) - indicator(minus, x)) / (2 * step);
        EXPECT_NEAR(igrad[h][k], ifd, 1e-6 * std::max(1.0, std::abs(ifd)));
      }
    }
  }
}

TEST(Boundedness, DetectsOpenPolytopes) {
  EXPECT_TRUE(is_bounded(unit_cube().planes));
  std::vector<HalfPlane> slab = {{Vec3::UnitX(), -1.0}, {-Vec3::UnitX(), -1.0},
                                 {Vec3::UnitY(), -1.0}, {-Vec3::UnitY(), -1.0}};
  EXPECT_FALSE(is_bounded(slab));
  slab.push_back({Vec3::UnitZ(), -1.0});
  EXPECT_FALSE(is_bounded(slab));
  slab.push_back({-Vec3::UnitZ(), -1.0});
  EXPECT_TRUE(is_bounded(slab));
}

TEST(Validation, RejectsBadPrimitives) {
  EXPECT_NO_THROW(validate_primitive(unit_cube()));
  ConvexPrimitive few = unit_cube();
  few.planes.resize(3);
  EXPECT_THROW(validate_primitive(few), ValidationError);
  ConvexPrimitive bad_delta = unit_cube();
  bad_delta.delta = 0.0;
  EXPECT_THROW(validate_primitive(bad_delta), ValidationError);
  ConvexPrimitive bad_sigma = unit_cube();
  bad_sigma.sigma = -1.0;
  EXPECT_THROW(validate_primitive(bad_sigma), ValidationError);
  ConvexPrimitive non_unit = unit_cube();
  non_unit.planes[0].normal *= 2.0;
  EXPECT_THROW(validate_primitive(non_unit), ValidationError);
  ConvexPrimitive nan = unit_cube();
  nan.planes[1].offset = std::nan("");
  EXPECT_THROW(validate_primitive(nan), ValidationError);
}

TEST(NormalizePlanes, RescalesAndReplacesZeroNormals) {
  std::mt19937_64 rng(4);
  ConvexPrimitive p = unit_cube();
  p.planes[0].normal *= 4.0;
  p.planes[0].offset *= 4.0;
  p.planes[1].normal = Vec3::Zero();
  EXPECT_TRUE(normalize_planes(p, rng));
  for (const auto& h : p.planes) EXPECT_NEAR(h.normal.norm(), 1.0, 1e-12);
  EXPECT_NEAR(p.planes[0].offset, -0.5, 1e-12);
  ConvexPrimitive q = unit_cube();
  EXPECT_FALSE(normalize_planes(q, rng));
}

TEST(BoxPrimitive, FacesMatchTheBox) {
  const Vec3 c(1.0, -2.0, 3.0);
  const Vec3 half(0.3, 0.4, 0.5);
  const ConvexPrimitive box = box_primitive(c, half, 1e4, 1.0);
  EXPECT_EQ(box.face_count(), kDefaultFaceCount);
  EXPECT_EQ(box.center, c);
  for (int a = 0; a < 3; ++a) {
    Vec3 on_face = c;
    on_face[a] += half[a];
    EXPECT_NEAR(normalized_sdf(box, on_face), 0.0, 1e-3);
  }
  EXPECT_NEAR(normalized_sdf(box, c), -0.3, 1e-3);
}

TEST(ChebyshevCenter, BoxCenterAndInradius) {
  const Vec3 c(0.2, 0.1, -0.4);
  const ConvexPrimitive box = box_primitive(c, Vec3(0.2, 0.5, 0.7));
  double value = 0.0;
  const Vec3 center = chebyshev_center(box.planes, &value);
  EXPECT_NEAR(value, -0.2, 1e-9);
  // The thin axis pins x; the other coordinates may slide within the slab.
  EXPECT_NEAR(center.x(), c.x(), 1e-9);
  double m = -1e9;
  for (const auto& h : box.planes) m = std::max(m, plane_distance(h, center));
  EXPECT_NEAR(m, value, 1e-9);
}

TEST(ChebyshevCenter, RegularTetrahedron) {
  std::vector<HalfPlane> planes;
  const Vec3 dirs[4] = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  const Vec3 shift(0.5, -0.25, 2.0);
  for (const Vec3& d : dirs) {
    const Vec3 n = d.normalized();
    planes.push_back({n, -0.3 - n.dot(shift)});
  }
  double value = 0.0;
  const Vec3 center = chebyshev_center(planes, &value);
  EXPECT_NEAR((center - shift).norm(), 0.0, 1e-9);
  EXPECT_NEAR(value, -0.3, 1e-9);
}
