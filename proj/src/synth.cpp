#include "napa/synth.hpp"

#include "napa/error.hpp"
#include "napa/image_io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace napa {

namespace {

constexpr double kDeg = M_PI / 180.0;

// Upright figure facing the camera with the arms slightly away from the body.
Pose3D template_pose() {
  const double xyz[18][3] = {{0, 0, 0},     {-10, 0, 0},  {-10, 40, 0},  {-10, 80, 0},
                             {10, 0, 0},    {10, 40, 0},  {10, 80, 0},   {0, -25, 0},
                             {0, -50, 0},   {0, -58, 0},  {0, -66, 0},   {0, -78, 0},
                             {18, -50, 0},  {24, -21, 0}, {28, 7, 0},    {-18, -50, 0},
                             {-24, -21, 0}, {-28, 7, 0}};
  Pose3D p;
  for (int j = 0; j < 18; ++j) p.coords[j] = Vec3(xyz[j][0], xyz[j][1], xyz[j][2]);
  return p;
}
constexpr double kTemplateHeight = 158.0;

// How far (degrees) a bone may swing away from its template direction.
double max_swing(const std::string& child) {
  if (child.find("elbow") != std::string::npos || child.find("wrist") != std::string::npos) return 100.0;
  if (child.find("knee") != std::string::npos || child.find("ankle") != std::string::npos) return 60.0;
  if (child.find("hip") != std::string::npos || child.find("shoulder") != std::string::npos) return 10.0;
  return 20.0;
}

Eigen::Matrix3d random_swing(std::mt19937_64& rng, double max_deg) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  if (axis.norm() < 1e-12) axis = Vec3::UnitZ();
  const double angle = std::uniform_real_distribution<double>(0.0, max_deg * kDeg)(rng);
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

bool limits_hold_at(const Pose3D& p, int child, const AngleLimitTable& limits) {
  for (const auto& l : limits.limits()) {
    if (l.child != child) continue;
    const double a = measure_angle(p, l);
    if (!(a >= l.min_deg && a <= l.max_deg)) return false;
  }
  return true;
}

}  // namespace

Pose3D sample_pose(std::mt19937_64& rng, const BoneMapSpec& spec, double figure_scale,
                   const AngleLimitTable& limits) {
  const auto& chain = KinematicChain::standard();
  const Pose3D tmpl = template_pose();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    Pose3D p;
    for (int j : chain.topological_order()) {
      if (j == chain.root()) continue;
      const int parent = chain.parents()[j];
      const Vec3 base = tmpl.coords[j] - tmpl.coords[parent];
      const double swing = max_swing(chain.name(j));
      for (int tries = 0; tries < 200; ++tries) {
        p.coords[j] = p.coords[parent] + random_swing(rng, swing) * base;
        if (limits_hold_at(p, j, limits)) break;
      }
    }
    const auto check = check_angle_limits(p, chain, limits);
    if (!check.violations.empty() || !check.indeterminate.empty()) continue;

    const Eigen::Matrix3d view =
        (Eigen::AngleAxisd((unit(rng) * 30.0 - 15.0) * kDeg, Vec3::UnitZ()) *
         Eigen::AngleAxisd((unit(rng) * 120.0 - 60.0) * kDeg, Vec3::UnitY()))
            .toRotationMatrix();
    for (auto& c : p.coords) c = view * c;

    const double margin = std::ceil(spec.bone_width);
    const double avail_w = spec.width - 1 - 2 * margin;
    const double avail_h = spec.height - 1 - 2 * margin;
    if (avail_w <= 0 || avail_h <= 0) throw ConfigError("synth: image too small for the bone width");
    Vec2 lo(1e300, 1e300), hi(-1e300, -1e300);
    for (const auto& c : p.coords) {
      lo = lo.cwiseMin(c.head<2>());
      hi = hi.cwiseMax(c.head<2>());
    }
    double scale = figure_scale * std::min(spec.width, spec.height) / kTemplateHeight;
    const Vec2 extent = hi - lo;
    scale = std::min({scale, avail_w / std::max(extent.x(), 1e-9), avail_h / std::max(extent.y(), 1e-9)});
    const Vec2 slack(avail_w - scale * extent.x(), avail_h - scale * extent.y());
    const Vec2 offset(margin + unit(rng) * slack.x() - scale * lo.x(),
                      margin + unit(rng) * slack.y() - scale * lo.y());
    for (auto& c : p.coords) {
      c *= scale;
      c.head<2>() += offset;
    }
    return p;
  }
  throw Error("synth: could not sample a pose within the angle limits");
}

std::vector<SynthSample> synth_dataset(const SynthOptions& options) {
  const auto& chain = KinematicChain::standard();
  options.spec.validate(chain.num_bones());
  std::mt19937_64 rng(options.seed);
  std::vector<SynthSample> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    SynthSample s;
    s.pose = sample_pose(rng, options.spec, options.figure_scale, options.limits);

    char id[32];
    std::snprintf(id, sizeof id, "synth_%05zu", i);
    SampleRecord& r = s.record;
    r.image_id = id;
    r.image = std::string("images/") + id + ".png";
    r.keypoints = s.pose.projection();
    std::vector<double> depth(chain.num_joints());
    for (std::size_t j = 0; j < depth.size(); ++j) depth[j] = s.pose.coords[j].z();
    r.depth_rel = depth;
    const int neck = chain.index_of("neck");
    const int head = chain.index_of("head");
    const int top = chain.index_of("head_top");
    const double side = (s.pose.coords[top] - s.pose.coords[neck]).norm() + options.spec.bone_width;
    const Vec2 centre = s.pose.coords[head].head<2>();
    r.head_box = {centre.x() - side / 2, centre.y() - side / 2, side, side};
    r.domain = Domain::real;
    r.width = options.spec.width;
    r.height = options.spec.height;

    s.image = render_hard(r.keypoints, chain, options.spec);
    if (options.noise_background) {
      std::uniform_int_distribution<int> noise(0, 127);
      for (int y = 0; y < s.image.height; ++y)
        for (int x = 0; x < s.image.width; ++x)
          if (s.image.at(y, x) == options.spec.background) {
            s.image.set(y, x, Rgb8{static_cast<std::uint8_t>(noise(rng)), static_cast<std::uint8_t>(noise(rng)),
                                   static_cast<std::uint8_t>(noise(rng))});
          }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, const SynthOptions& options) {
  const auto samples = synth_dataset(options);
  std::filesystem::create_directories(dir / "images");
  std::vector<SampleRecord> records;
  for (const auto& s : samples) {
    save_png(dir / s.record.image, s.image);
    records.push_back(s.record);
  }
  const auto manifest = dir / "manifest.jsonl";
  save_manifest(manifest, records);
  return manifest;
}

}  // namespace napa
