#pragma once

#include <Eigen/Core>

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace napa {

inline constexpr std::size_t kNumJoints = 18;
inline constexpr std::size_t kNumBones = kNumJoints - 1;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

struct Bone {
  int parent = 0;
  int child = 0;
};

// Tree of joints rooted at the pelvis. The order of `bones` is fixed: it is
// the serialization order for bone vectors and the colour order of bone maps.
class KinematicChain {
 public:
  KinematicChain(std::vector<std::string> joint_names, std::vector<int> parent);

  // pelvis, r_hip, r_knee, r_ankle, l_hip, l_knee, l_ankle, spine, thorax,
  // neck, head, head_top, l_shoulder, l_elbow, l_wrist, r_shoulder, r_elbow,
  // r_wrist.
  static const KinematicChain& standard();

  std::size_t num_joints() const { return names_.size(); }
  std::size_t num_bones() const { return bones_.size(); }
  const std::vector<std::string>& joint_names() const { return names_; }
  const std::vector<int>& parents() const { return parent_; }
  const std::vector<Bone>& bones() const { return bones_; }
  int root() const { return root_; }
  int index_of(std::string_view name) const;  // -1 when unknown
  const std::string& name(int joint) const { return names_.at(joint); }
  std::string bone_name(std::size_t bone) const;
  // Index of the bone whose child is `joint`, -1 for the root.
  int bone_ending_at(int joint) const;
  // Joints in an order where every parent precedes its children.
  const std::vector<int>& topological_order() const { return topo_; }

  nlohmann::json to_json() const;
  static KinematicChain from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> names_;
  std::vector<int> parent_;  // root stores its own index
  std::vector<Bone> bones_;
  std::vector<int> topo_;
  int root_ = 0;
};

struct Pose2D {
  std::vector<Vec2> coords;
  std::vector<bool> visible;

  explicit Pose2D(std::size_t joints = kNumJoints)
      : coords(joints, Vec2::Zero()), visible(joints, true) {}
  std::size_t size() const { return coords.size(); }
  std::size_t num_visible() const;
};

// (u, v) in pixels, z relative depth in pixel-equivalent units (pelvis z = 0
// in the canonical frame).
struct Pose3D {
  std::vector<Vec3> coords;

  explicit Pose3D(std::size_t joints = kNumJoints) : coords(joints, Vec3::Zero()) {}
  std::size_t size() const { return coords.size(); }
  Pose2D projection() const;
  static Pose3D lift(const Pose2D& pose, const std::vector<double>& depth);
};

struct BoneVectors {
  std::vector<Vec3> vectors;
  std::vector<Vec3> mean;
  std::vector<Vec3> std;

  // Identity statistics (mean 0, std 1).
  static BoneVectors with_unit_stats(std::vector<Vec3> vectors);
};

BoneVectors bone_vectors(const Pose3D& pose, const KinematicChain& chain);

Pose3D pose_from_bones(const Vec3& root_position, const BoneVectors& bones,
                       const KinematicChain& chain);
Pose3D pose_from_bones(const Vec3& root_position, const std::vector<Vec3>& vectors,
                       const KinematicChain& chain);

// (vector - mean) / std elementwise. Throws ConfigError on std <= 0.
std::vector<Vec3> standardize_bones(const BoneVectors& bones);
std::vector<Vec3> destandardize_bones(const std::vector<Vec3>& standardized,
                                      const std::vector<Vec3>& mean,
                                      const std::vector<Vec3>& std);

// Dataset statistics; std is floored at `min_std` to stay strictly positive.
void fit_bone_statistics(const std::vector<Pose3D>& poses, const KinematicChain& chain,
                         std::vector<Vec3>& mean, std::vector<Vec3>& std,
                         double min_std = 1e-3);

// ---------------------------------------------------------------------------
// Joint angle limits.
//
// The measured angle of a pair is the interior angle at the shared joint
// between (parent - joint) and (child - joint): 180 degrees is a straight limb.
// Ball joints use the unsigned angle in [0, 180]. Hinge joints take the bend
// direction into account against a lateral body axis (`axis_from` minus
// `axis_to`, e.g. r_hip - l_hip); bending to the disallowed side reports
// 360 - angle, so hyperextension shows up above 180.

enum class JointKind { ball, hinge };

struct AngleLimit {
  int parent = 0;
  int joint = 0;
  int child = 0;
  double min_deg = 0.0;
  double max_deg = 180.0;
  JointKind kind = JointKind::ball;
  int bend_sign = 1;  // hinge only: allowed side of cross(a, b) . axis
  int axis_from = -1;
  int axis_to = -1;
};

class AngleLimitTable {
 public:
  AngleLimitTable() = default;
  explicit AngleLimitTable(std::vector<AngleLimit> limits);

  // Knee/elbow hinges in [0, 180], hip/shoulder balls in [0, 170], every other
  // pair unconstrained in [0, 180].
  static AngleLimitTable defaults(const KinematicChain& chain);

  const std::vector<AngleLimit>& limits() const { return limits_; }
  void set_interval(const std::string& name, double min_deg, double max_deg,
                    const KinematicChain& chain);
  // Throws ConfigError when a non-root bone with a parent bone lacks an entry.
  void validate(const KinematicChain& chain) const;

  nlohmann::json to_json(const KinematicChain& chain) const;
  static AngleLimitTable from_json(const nlohmann::json& j, const KinematicChain& chain);

 private:
  std::vector<AngleLimit> limits_;
};

// "r_hip-r_knee-r_ankle"
std::string limit_name(const AngleLimit& limit, const KinematicChain& chain);

struct AngleViolation {
  std::string name;
  double measured_deg = 0.0;
  double min_deg = 0.0;
  double max_deg = 0.0;
};

struct AngleCheck {
  std::vector<AngleViolation> violations;
  std::vector<std::string> indeterminate;  // pairs with a zero-length bone
};

double measure_angle(const Pose3D& pose, const AngleLimit& limit);
AngleCheck check_angle_limits(const Pose3D& pose, const KinematicChain& chain,
                              const AngleLimitTable& limits);

}  // namespace napa
