#include "napa/bonemap.hpp"
#include "napa/error.hpp"

#include "doctest_compat.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace napa;

namespace {

// Independent form of the ellipse test: no normalised axis, just dot and
// cross products with the raw bone vector.
bool oracle_inside(double px, double py, double x1, double y1, double x2, double y2, double d) {
  const double bx = x2 - x1, by = y2 - y1;
  const double l2 = bx * bx + by * by;
  const double rx = px - 0.5 * (x1 + x2), ry = py - 0.5 * (y1 + y2);
  const double dot = rx * bx + ry * by;
  const double cross = rx * by - ry * bx;
  // across^2 = cross^2 / l2, along^2 = dot^2 / l2
  return 4.0 * cross * cross / (d * d * l2) + 4.0 * dot * dot / (l2 * l2) <= 1.0;
}

Pose2D single_bone_pose(const Vec2& a, const Vec2& b) {
  // Only pelvis->r_hip is visible.
  Pose2D p;
  std::fill(p.visible.begin(), p.visible.end(), false);
  p.coords[0] = a;
  p.coords[1] = b;
  p.visible[0] = p.visible[1] = true;
  return p;
}

std::set<std::pair<int, int>> foreground(const BoneMap& m, const Rgb8& bg) {
  std::set<std::pair<int, int>> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(y, x) != bg) out.insert({x, y});
  return out;
}

}  // namespace

TEST_SUITE("bonemap") {

TEST_CASE("bone_region_test examples") {
  const Vec2 a(100, 100), b(100, 160);
  CHECK(bone_region_test(Vec2(100, 130), a, b, 10));
  CHECK(bone_quadratic_form(Vec2(106, 130), a, b, 10) == doctest::Approx(1.44));
  CHECK_FALSE(bone_region_test(Vec2(106, 130), a, b, 10));
  CHECK(bone_quadratic_form(Vec2(104, 130), a, b, 10) == doctest::Approx(16.0 / 25.0));
  CHECK(bone_region_test(Vec2(104, 130), a, b, 10));
  CHECK(bone_quadratic_form(Vec2(100, 100), a, b, 10) == 1.0);
  CHECK(bone_region_test(Vec2(100, 100), a, b, 10));
  CHECK_THROWS_AS(bone_region_test(Vec2(0, 0), a, a, 10), DegenerateError);
}

TEST_CASE("spec validation") {
  BoneMapSpec s;
  CHECK_NOTHROW(s.validate(17));
  CHECK(s.palette.size() == 17);
  s.bone_width = 0;
  CHECK_THROWS_AS(s.validate(17), ConfigError);
  s = BoneMapSpec{};
  s.palette[3] = s.palette[4];
  CHECK_THROWS_AS(s.validate(17), ConfigError);
  s = BoneMapSpec{};
  s.background = s.palette[0];
  CHECK_THROWS_AS(s.validate(17), ConfigError);
  const auto back = BoneMapSpec::from_json(BoneMapSpec{}.to_json());
  CHECK(back.palette == BoneMapSpec{}.palette);
}

TEST_CASE("render_hard") {
  const auto& chain = KinematicChain::standard();
  BoneMapSpec spec;
  spec.height = spec.width = 64;

  SUBCASE("collocated joints give background only") {
    Pose2D p;
    for (auto& c : p.coords) c = Vec2(30, 30);
    const BoneMap m = render_hard(p, chain, spec);
    CHECK(foreground(m, spec.background).empty());
    CHECK(m.skipped_bones.size() == 17);
  }
  SUBCASE("single bone matches the per-pixel oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5, 69);
    for (int i = 0; i < 20; ++i) {
      const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
      spec.bone_width = std::uniform_real_distribution<double>(1.0, 14.0)(rng);
      const BoneMap m = render_hard(single_bone_pose(a, b), chain, spec);
      int mismatches = 0;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          const bool fg = m.at(y, x) == spec.palette[0];
          if (fg != oracle_inside(x, y, a.x(), a.y(), b.x(), b.y(), spec.bone_width)) ++mismatches;
        }
      CHECK(mismatches == 0);
    }
  }
  SUBCASE("endpoint swap leaves the mask unchanged") {
    const Vec2 a(10.3, 50.8), b(47.1, 12.6);
    const auto f1 = foreground(render_hard(single_bone_pose(a, b), chain, spec), spec.background);
    const auto f2 = foreground(render_hard(single_bone_pose(b, a), chain, spec), spec.background);
    CHECK(f1 == f2);
    CHECK(!f1.empty());
  }
  SUBCASE("wider bones contain narrower ones") {
    const Vec2 a(20, 20), b(40, 45);
    spec.bone_width = 4;
    const auto thin = foreground(render_hard(single_bone_pose(a, b), chain, spec), spec.background);
    spec.bone_width = 12;
    const auto wide = foreground(render_hard(single_bone_pose(a, b), chain, spec), spec.background);
    for (const auto& px : thin) CHECK(wide.count(px) == 1);
    CHECK(wide.size() > thin.size());
  }
  SUBCASE("later bones overwrite earlier ones") {
    Pose2D p;
    std::fill(p.visible.begin(), p.visible.end(), false);
    // pelvis->r_hip (bone 0) and pelvis->l_hip (bone 3) crossing at the pelvis.
    p.coords[0] = Vec2(32, 32);
    p.coords[1] = Vec2(20, 32);
    p.coords[4] = Vec2(44, 32);
    p.visible[0] = p.visible[1] = p.visible[4] = true;
    const BoneMap m = render_hard(p, chain, spec);
    CHECK(m.at(32, 32) == spec.palette[3]);
  }
  SUBCASE("translation equivariance") {
    Pose2D p = testing::standing_pose().projection();
    for (auto& c : p.coords) c = 0.4 * c + Vec2(30, 28);
    Pose2D q = p;
    for (auto& c : q.coords) c += Vec2(3, -2);
    const BoneMap m1 = render_hard(p, chain, spec);
    const BoneMap m2 = render_hard(q, chain, spec);
    for (int y = 4; y < 60; ++y)
      for (int x = 4; x < 60; ++x) CHECK(m1.at(y, x) == m2.at(y - 2, x + 3));
  }
  SUBCASE("deterministic") {
    Pose2D p = testing::standing_pose().projection();
    for (auto& c : p.coords) c = 0.5 * c + Vec2(32, 30);
    CHECK(render_hard(p, chain, spec).pixels == render_hard(p, chain, spec).pixels);
  }
}

TEST_CASE("loop_point") {
  const Vec2 a(0, 0), b(0, 60);
  CHECK(loop_point(a, b, 5, 0.0, 1, 10) == a);
  CHECK(loop_point(a, b, 5, 0.5, 1, 10) == b);
  CHECK(loop_point(a, b, 5, 1.0, 1, 10) == a);
  CHECK((loop_point(a, b, 5, 0.25, 1, 10) - Vec2(5, 30)).norm() < 1e-12);
  CHECK((loop_point(a, b, 5, 0.25, -1, 10) - Vec2(-5, 30)).norm() < 1e-12);
  CHECK((loop_point(a, b, 5, 0.75, 1, 10) - Vec2(-5, 30)).norm() < 1e-12);
  CHECK_THROWS_AS(loop_point(a, b, 6, 0.3, 1, 10), ConfigError);
  CHECK_THROWS_AS(loop_point(a, b, 0, 0.3, 1, 10), ConfigError);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const Vec2 p(12.5, -3.0), q(40.0, 22.0);
  for (int i = 0; i < 100; ++i) {
    const double t = u(rng);
    const double ai = 1.0 + 3.0 * u(rng);
    const Vec2 pt = loop_point(p, q, ai, t, 1, 8.0);
    // On the ellipse of cross semi-axis a_i.
    CHECK(std::abs(bone_quadratic_form(pt, p, q, 2.0 * ai) - 1.0) < 1e-6);
  }
}

}
