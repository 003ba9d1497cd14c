#pragma once

#include "napa/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace napa {

using Rgb8 = std::array<std::uint8_t, 3>;

struct BoneMapSpec {
  int height = 224;
  int width = 224;
  double bone_width = 9.0;  // d, full width across the bone
  std::vector<Rgb8> palette = default_palette(kNumBones);
  Rgb8 background{0, 0, 0};
  double soft_sharpness = 10.0;

  // `count` fully saturated colours with evenly spaced hues.
  static std::vector<Rgb8> default_palette(std::size_t count);
  // Throws ConfigError on d <= 0, duplicate colours or a colour equal to the
  // background.
  void validate(std::size_t bones) const;

  nlohmann::json to_json() const;
  static BoneMapSpec from_json(const nlohmann::json& j);
};

// H x W x 3 bytes, row-major, RGB. Channel values map to [0, 1] as byte / 255.
struct BoneMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::size_t> skipped_bones;  // degenerate or invisible

  BoneMap() = default;
  BoneMap(int h, int w, const Rgb8& fill);
  Rgb8 at(int y, int x) const;
  void set(int y, int x, const Rgb8& c);
  double value(int y, int x, int channel) const;
};

// Pixel centres sit at integer coordinates: pixel (x, y) is column x, row y.
//
// The bone region is the filled ellipse centred on the bone midpoint with
// semi-axis L/2 along the bone and d/2 across it:
//   q = across^2 / (d/2)^2 + along^2 / (L/2)^2 <= 1.
// Throws DegenerateError for coincident endpoints.
double bone_quadratic_form(const Vec2& pixel, const Vec2& from, const Vec2& to, double bone_width);
bool bone_region_test(const Vec2& pixel, const Vec2& from, const Vec2& to, double bone_width);

// Each pixel takes the palette colour of the last bone (in bone order) whose
// region contains it. Bones with an invisible or coincident endpoint are
// skipped and listed in `skipped_bones`.
BoneMap render_hard(const Pose2D& pose, const KinematicChain& chain, const BoneMapSpec& spec);

// Closed loop on the ellipse of cross semi-axis `cross_semi_axis` around the
// bone: t = 0 and t = 1 map to `from`, t = 1/2 to `to`. The cross-axis offset
// grows linearly to its maximum at t = 1/4 (mid-bone), returns to the axis at
// t = 1/2, and repeats on the opposite side. `orientation` (+1 or -1) picks
// the side traversed first; +1 is the side of the normal (dy, -dx).
Vec2 loop_point(const Vec2& from, const Vec2& to, double cross_semi_axis, double t,
                int orientation, double bone_width);

}  // namespace napa
