#pragma once

#include "napa/skeleton.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace napa {

struct SimilarityTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// Least-squares similarity (rotation, positive scale, translation) taking
// `pred` onto `gt`; reflections are excluded. With `with_scale = false` the
// scale is pinned to 1. Throws DegenerateError when pred has fewer than three
// non-collinear joints.
SimilarityTransform procrustes_fit(const Pose3D& pred, const Pose3D& gt, bool with_scale = true);
Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt, bool with_scale = true);

double mpjpe(const Pose3D& pred, const Pose3D& gt, bool align, bool with_scale = true);
std::vector<double> joint_errors(const Pose3D& pred, const Pose3D& gt);

// PCKh rows in table order.
enum class JointGroup { ankle, knee, wrist, elbow, shoulder, head, hip };
inline constexpr std::size_t kNumGroups = 7;
inline constexpr std::array<const char*, kNumGroups> kGroupNames = {
    "Ankle", "Knee", "Wrist", "Elbow", "Shoulder", "Head", "Hip"};

// Every joint belongs to exactly one group so the total is the count-weighted
// aggregate of the rows: torso joints (pelvis, spine) fold into Hip, thorax
// into Shoulder, neck into Head.
JointGroup joint_group(const std::string& joint_name);

struct GroupScore {
  std::size_t correct = 0;
  std::size_t counted = 0;
  // NaN when nothing was counted.
  double percent() const;
};

struct PckhResult {
  std::array<GroupScore, kNumGroups> groups{};
  GroupScore total;
  std::vector<double> distances;  // per joint, NaN for invisible
  std::vector<bool> correct;
};

// A joint is correct iff ||pred - gt|| <= ratio * head_size. Joints invisible
// in gt are excluded. Throws ConfigError when head_size <= 0.
PckhResult pckh(const Pose2D& pred, const Pose2D& gt, double head_size,
                double threshold_ratio = 0.25,
                const KinematicChain& chain = KinematicChain::standard());

// Accumulates several images into one set of rows.
void accumulate(PckhResult& into, const PckhResult& sample);

// Head box [x, y, w, h] -> diagonal length.
double head_size_from_box(const std::array<double, 4>& box);

}  // namespace napa
