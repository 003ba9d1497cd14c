#include "napa/bonemap.hpp"

#include "napa/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace napa {

std::vector<Rgb8> BoneMapSpec::default_palette(std::size_t count) {
  std::vector<Rgb8> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double h = 6.0 * static_cast<double>(k) / static_cast<double>(count);
    const int sector = static_cast<int>(h);
    const double f = h - sector;
    const auto up = static_cast<std::uint8_t>(std::lround(255.0 * f));
    const auto down = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - f)));
    switch (sector % 6) {
      case 0: out.push_back({255, up, 0}); break;
      case 1: out.push_back({down, 255, 0}); break;
      case 2: out.push_back({0, 255, up}); break;
      case 3: out.push_back({0, down, 255}); break;
      case 4: out.push_back({up, 0, 255}); break;
      default: out.push_back({255, 0, down}); break;
    }
  }
  return out;
}

void BoneMapSpec::validate(std::size_t bones) const {
  if (height <= 0 || width <= 0) throw ConfigError("bone map size must be positive");
  if (!(bone_width > 0.0)) throw ConfigError("bone width must be positive");
  if (!(soft_sharpness > 0.0)) throw ConfigError("soft sharpness must be positive");
  if (palette.size() < bones) throw ConfigError("palette needs one colour per bone");
  std::set<Rgb8> seen;
  for (const Rgb8& c : palette) {
    if (c == background) throw ConfigError("palette colour equals the background");
    if (!seen.insert(c).second) throw ConfigError("palette colours must be distinct");
  }
}

nlohmann::json BoneMapSpec::to_json() const {
  return {{"height", height},         {"width", width},           {"bone_width", bone_width},
          {"palette", palette},       {"background", background}, {"soft_sharpness", soft_sharpness}};
}

BoneMapSpec BoneMapSpec::from_json(const nlohmann::json& j) {
  BoneMapSpec s;
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.bone_width = j.value("bone_width", s.bone_width);
  if (j.contains("palette")) s.palette = j.at("palette").get<std::vector<Rgb8>>();
  if (j.contains("background")) s.background = j.at("background").get<Rgb8>();
  s.soft_sharpness = j.value("soft_sharpness", s.soft_sharpness);
  return s;
}

BoneMap::BoneMap(int h, int w, const Rgb8& fill) : height(h), width(w) {
  pixels.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill[0];
    pixels[i + 1] = fill[1];
    pixels[i + 2] = fill[2];
  }
}

Rgb8 BoneMap::at(int y, int x) const {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void BoneMap::set(int y, int x, const Rgb8& c) {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

double BoneMap::value(int y, int x, int channel) const {
  return at(y, x)[static_cast<std::size_t>(channel)] / 255.0;
}

double bone_quadratic_form(const Vec2& pixel, const Vec2& from, const Vec2& to, double bone_width) {
  const Vec2 axis = to - from;
  const double length = axis.norm();
  if (length == 0.0) throw DegenerateError("bone endpoints coincide");
  const Vec2 u = axis / length;
  const Vec2 rel = pixel - 0.5 * (from + to);
  const double along = rel.dot(u);
  const double across = rel.x() * u.y() - rel.y() * u.x();
  const double half_len = 0.5 * length;
  const double half_width = 0.5 * bone_width;
  return (across * across) / (half_width * half_width) + (along * along) / (half_len * half_len);
}

bool bone_region_test(const Vec2& pixel, const Vec2& from, const Vec2& to, double bone_width) {
  return bone_quadratic_form(pixel, from, to, bone_width) <= 1.0;
}

BoneMap render_hard(const Pose2D& pose, const KinematicChain& chain, const BoneMapSpec& spec) {
  spec.validate(chain.num_bones());
  BoneMap map(spec.height, spec.width, spec.background);
  for (std::size_t k = 0; k < chain.num_bones(); ++k) {
    const Bone& b = chain.bones()[k];
    const Vec2& p1 = pose.coords.at(static_cast<std::size_t>(b.parent));
    const Vec2& p2 = pose.coords.at(static_cast<std::size_t>(b.child));
    if (!pose.visible[b.parent] || !pose.visible[b.child] || p1 == p2) {
      map.skipped_bones.push_back(k);
      continue;
    }
    // The ellipse fits in the disc around the midpoint of radius max(L, d)/2.
    const Vec2 mid = 0.5 * (p1 + p2);
    const double r = 0.5 * std::max((p2 - p1).norm(), spec.bone_width) + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(mid.x() - r)));
    const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(mid.x() + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(mid.y() - r)));
    const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(mid.y() + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (bone_region_test(Vec2(x, y), p1, p2, spec.bone_width)) map.set(y, x, spec.palette[k]);
      }
    }
  }
  return map;
}

Vec2 loop_point(const Vec2& from, const Vec2& to, double cross_semi_axis, double t, int orientation,
                double bone_width) {
  if (!(cross_semi_axis > 0.0 && cross_semi_axis <= 0.5 * bone_width)) {
    throw ConfigError("loop semi-axis must lie in (0, d/2]");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("loop parameter must lie in [0, 1]");
  if (orientation != 1 && orientation != -1) throw ConfigError("orientation must be +1 or -1");
  const Vec2 axis = to - from;
  const double length = axis.norm();
  if (length == 0.0) throw DegenerateError("bone endpoints coincide");

  if (t == 0.0 || t == 1.0) return from;
  if (t == 0.5) return to;

  const Vec2 u = axis / length;
  const Vec2 n(u.y(), -u.x());
  const double a = cross_semi_axis;

  double cross = 0.0;
  double along_sign = 0.0;
  double side = orientation;
  if (t <= 0.25) {
    cross = 4.0 * a * t;
    along_sign = -1.0;
  } else if (t <= 0.5) {
    cross = a * (1.0 - 4.0 * (t - 0.25));
    along_sign = 1.0;
  } else if (t <= 0.75) {
    cross = 4.0 * a * (t - 0.5);
    along_sign = 1.0;
    side = -side;
  } else {
    cross = a * (1.0 - 4.0 * (t - 0.75));
    along_sign = -1.0;
    side = -side;
  }
  const double ratio = std::min(1.0, cross / a);
  const double along = along_sign * 0.5 * length * std::sqrt(1.0 - ratio * ratio);
  return 0.5 * (from + to) + along * u + side * cross * n;
}

}  // namespace napa
