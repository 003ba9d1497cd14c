#include "napa/skeleton.hpp"

#include "napa/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace napa {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ConfigError(std::string(what) + ": expected " + std::to_string(want) + " entries, got " +
                      std::to_string(got));
  }
}

}  // namespace

KinematicChain::KinematicChain(std::vector<std::string> joint_names, std::vector<int> parent)
    : names_(std::move(joint_names)), parent_(std::move(parent)) {
  require_size(parent_.size(), names_.size(), "parent");
  const int n = static_cast<int>(names_.size());
  int roots = 0;
  for (int j = 0; j < n; ++j) {
    const int p = parent_[j];
    if (p < 0 || p == j) {
      parent_[j] = j;
      root_ = j;
      ++roots;
    } else if (p >= n) {
      throw ConfigError("joint " + names_[j] + " has out-of-range parent");
    }
  }
  if (roots != 1) throw ConfigError("kinematic chain must have exactly one root");

  // Breadth-first from the root; anything not reached is on a cycle.
  std::vector<std::vector<int>> children(n);
  for (int j = 0; j < n; ++j) {
    if (j != root_) children[parent_[j]].push_back(j);
  }
  topo_.push_back(root_);
  for (std::size_t i = 0; i < topo_.size(); ++i) {
    for (int c : children[topo_[i]]) topo_.push_back(c);
  }
  if (static_cast<int>(topo_.size()) != n) {
    throw ConfigError("kinematic chain parent links contain a cycle");
  }

  // Bones follow joint index order, which for the standard chain is the
  // documented traversal.
  for (int j = 0; j < n; ++j) {
    if (j != root_) bones_.push_back({parent_[j], j});
  }
}

const KinematicChain& KinematicChain::standard() {
  static const KinematicChain chain(
      {"pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "spine", "thorax",
       "neck", "head", "head_top", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow",
       "r_wrist"},
      {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 10, 8, 12, 13, 8, 15, 16});
  return chain;
}

int KinematicChain::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

std::string KinematicChain::bone_name(std::size_t bone) const {
  const Bone& b = bones_.at(bone);
  return names_[b.parent] + "-" + names_[b.child];
}

int KinematicChain::bone_ending_at(int joint) const {
  for (std::size_t k = 0; k < bones_.size(); ++k) {
    if (bones_[k].child == joint) return static_cast<int>(k);
  }
  return -1;
}

nlohmann::json KinematicChain::to_json() const {
  nlohmann::json bones = nlohmann::json::array();
  for (const Bone& b : bones_) bones.push_back({b.parent, b.child});
  std::vector<int> parent = parent_;
  parent[root_] = -1;
  return {{"joint_names", names_}, {"parent", parent}, {"bones", bones}};
}

KinematicChain KinematicChain::from_json(const nlohmann::json& j) {
  KinematicChain chain(j.at("joint_names").get<std::vector<std::string>>(),
                       j.at("parent").get<std::vector<int>>());
  if (j.contains("bones")) {
    const auto& bones = j.at("bones");
    require_size(bones.size(), chain.bones_.size(), "bones");
    for (std::size_t k = 0; k < bones.size(); ++k) {
      const Bone b{bones[k].at(0).get<int>(), bones[k].at(1).get<int>()};
      if (b.child < 0 || b.child >= static_cast<int>(chain.num_joints()) ||
          chain.parent_[b.child] != b.parent || b.child == chain.root_) {
        throw ConfigError("bone " + std::to_string(k) + " does not match the parent links");
      }
      chain.bones_[k] = b;
    }
  }
  return chain;
}

std::size_t Pose2D::num_visible() const {
  return static_cast<std::size_t>(std::count(visible.begin(), visible.end(), true));
}

Pose2D Pose3D::projection() const {
  Pose2D out(coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) out.coords[j] = coords[j].head<2>();
  return out;
}

Pose3D Pose3D::lift(const Pose2D& pose, const std::vector<double>& depth) {
  require_size(depth.size(), pose.size(), "depth");
  Pose3D out(pose.size());
  for (std::size_t j = 0; j < pose.size(); ++j) {
    out.coords[j] = Vec3(pose.coords[j].x(), pose.coords[j].y(), depth[j]);
  }
  return out;
}

BoneVectors BoneVectors::with_unit_stats(std::vector<Vec3> vectors) {
  BoneVectors out;
  out.mean.assign(vectors.size(), Vec3::Zero());
  out.std.assign(vectors.size(), Vec3::Ones());
  out.vectors = std::move(vectors);
  return out;
}

BoneVectors bone_vectors(const Pose3D& pose, const KinematicChain& chain) {
  require_size(pose.size(), chain.num_joints(), "pose");
  std::vector<Vec3> vectors;
  vectors.reserve(chain.num_bones());
  for (const Bone& b : chain.bones()) vectors.push_back(pose.coords[b.child] - pose.coords[b.parent]);
  return BoneVectors::with_unit_stats(std::move(vectors));
}

Pose3D pose_from_bones(const Vec3& root_position, const std::vector<Vec3>& vectors,
                       const KinematicChain& chain) {
  require_size(vectors.size(), chain.num_bones(), "bones");
  std::vector<int> bone_of(chain.num_joints(), -1);
  for (std::size_t k = 0; k < chain.num_bones(); ++k) bone_of[chain.bones()[k].child] = static_cast<int>(k);

  Pose3D pose(chain.num_joints());
  for (int j : chain.topological_order()) {
    if (j == chain.root()) {
      pose.coords[j] = root_position;
    } else {
      pose.coords[j] = pose.coords[chain.parents()[j]] + vectors[bone_of[j]];
    }
  }
  return pose;
}

Pose3D pose_from_bones(const Vec3& root_position, const BoneVectors& bones,
                       const KinematicChain& chain) {
  return pose_from_bones(root_position, bones.vectors, chain);
}

std::vector<Vec3> standardize_bones(const BoneVectors& bones) {
  require_size(bones.mean.size(), bones.vectors.size(), "bone mean");
  require_size(bones.std.size(), bones.vectors.size(), "bone std");
  std::vector<Vec3> out(bones.vectors.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if ((bones.std[k].array() <= 0.0).any()) {
      throw ConfigError("bone std must be strictly positive (bone " + std::to_string(k) + ")");
    }
    out[k] = ((bones.vectors[k] - bones.mean[k]).array() / bones.std[k].array()).matrix();
  }
  return out;
}

std::vector<Vec3> destandardize_bones(const std::vector<Vec3>& standardized,
                                      const std::vector<Vec3>& mean, const std::vector<Vec3>& std) {
  require_size(mean.size(), standardized.size(), "bone mean");
  require_size(std.size(), standardized.size(), "bone std");
  std::vector<Vec3> out(standardized.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (standardized[k].array() * std[k].array()).matrix() + mean[k];
  }
  return out;
}

void fit_bone_statistics(const std::vector<Pose3D>& poses, const KinematicChain& chain,
                         std::vector<Vec3>& mean, std::vector<Vec3>& std, double min_std) {
  const std::size_t nb = chain.num_bones();
  mean.assign(nb, Vec3::Zero());
  std.assign(nb, Vec3::Constant(min_std));
  if (poses.empty()) {
    std.assign(nb, Vec3::Ones());
    return;
  }
  std::vector<Vec3> sq(nb, Vec3::Zero());
  for (const Pose3D& p : poses) {
    const BoneVectors b = bone_vectors(p, chain);
    for (std::size_t k = 0; k < nb; ++k) {
      mean[k] += b.vectors[k];
      sq[k] += b.vectors[k].cwiseProduct(b.vectors[k]);
    }
  }
  const double n = static_cast<double>(poses.size());
  for (std::size_t k = 0; k < nb; ++k) {
    mean[k] /= n;
    const Vec3 var = (sq[k] / n - mean[k].cwiseProduct(mean[k])).cwiseMax(0.0);
    std[k] = var.cwiseSqrt().cwiseMax(min_std);
  }
}

// ---------------------------------------------------------------------------

AngleLimitTable::AngleLimitTable(std::vector<AngleLimit> limits) : limits_(std::move(limits)) {
  for (const AngleLimit& l : limits_) {
    if (!(l.min_deg >= 0.0 && l.max_deg <= 180.0 && l.min_deg <= l.max_deg)) {
      throw ConfigError("angle interval must lie within [0, 180] degrees");
    }
  }
}

AngleLimitTable AngleLimitTable::defaults(const KinematicChain& chain) {
  auto idx = [&](const char* n) { return chain.index_of(n); };
  const int r_hip = idx("r_hip"), l_hip = idx("l_hip");
  const int r_sh = idx("r_shoulder"), l_sh = idx("l_shoulder");

  std::vector<AngleLimit> limits;
  for (const Bone& b : chain.bones()) {
    const int joint = b.parent;
    if (joint == chain.root()) continue;
    AngleLimit l;
    l.parent = chain.parents()[joint];
    l.joint = joint;
    l.child = b.child;
    const std::string& jn = chain.name(joint);
    const std::string& cn = chain.name(b.child);
    if (jn == "r_knee" || jn == "l_knee") {
      l.kind = JointKind::hinge;
      l.bend_sign = 1;
      l.axis_from = r_hip;
      l.axis_to = l_hip;
    } else if (jn == "r_elbow" || jn == "l_elbow") {
      l.kind = JointKind::hinge;
      l.bend_sign = -1;
      l.axis_from = r_sh;
      l.axis_to = l_sh;
    } else if (jn == "r_hip" || jn == "l_hip" || cn == "r_elbow" || cn == "l_elbow") {
      // Hip joints and shoulder joints (the upper-arm bone meets the clavicle).
      l.max_deg = 170.0;
    }
    limits.push_back(l);
  }
  return AngleLimitTable(std::move(limits));
}

void AngleLimitTable::set_interval(const std::string& name, double min_deg, double max_deg,
                                   const KinematicChain& chain) {
  if (!(min_deg >= 0.0 && max_deg <= 180.0 && min_deg <= max_deg)) {
    throw ConfigError("angle interval for " + name + " must lie within [0, 180] degrees");
  }
  for (AngleLimit& l : limits_) {
    if (limit_name(l, chain) == name) {
      l.min_deg = min_deg;
      l.max_deg = max_deg;
      return;
    }
  }
  throw ConfigError("unknown angle limit " + name);
}

void AngleLimitTable::validate(const KinematicChain& chain) const {
  for (const Bone& b : chain.bones()) {
    if (b.parent == chain.root()) continue;
    const bool found = std::any_of(limits_.begin(), limits_.end(), [&](const AngleLimit& l) {
      return l.joint == b.parent && l.child == b.child && l.parent == chain.parents()[b.parent];
    });
    if (!found) throw ConfigError("missing angle limit for bone " + chain.name(b.parent) + "-" + chain.name(b.child));
  }
}

std::string limit_name(const AngleLimit& limit, const KinematicChain& chain) {
  return chain.name(limit.parent) + "-" + chain.name(limit.joint) + "-" + chain.name(limit.child);
}

nlohmann::json AngleLimitTable::to_json(const KinematicChain& chain) const {
  nlohmann::json limits = nlohmann::json::object();
  for (const AngleLimit& l : limits_) {
    nlohmann::json e = {{"min", l.min_deg}, {"max", l.max_deg},
                        {"kind", l.kind == JointKind::hinge ? "hinge" : "ball"}};
    if (l.kind == JointKind::hinge) {
      e["bend_sign"] = l.bend_sign;
      e["axis"] = {chain.name(l.axis_from), chain.name(l.axis_to)};
    }
    limits[limit_name(l, chain)] = e;
  }
  return {{"limits", limits}};
}

AngleLimitTable AngleLimitTable::from_json(const nlohmann::json& j, const KinematicChain& chain) {
  std::vector<AngleLimit> limits;
  for (const auto& [name, e] : j.at("limits").items()) {
    AngleLimit l;
    const auto a = name.find('-');
    const auto b = name.rfind('-');
    if (a == std::string::npos || a == b) throw ConfigError("bad angle limit key " + name);
    l.parent = chain.index_of(name.substr(0, a));
    l.joint = chain.index_of(name.substr(a + 1, b - a - 1));
    l.child = chain.index_of(name.substr(b + 1));
    if (l.parent < 0 || l.joint < 0 || l.child < 0 || chain.parents()[l.joint] != l.parent ||
        chain.parents()[l.child] != l.joint) {
      throw ConfigError("angle limit key " + name + " is not a parent/child bone pair");
    }
    l.min_deg = e.at("min").get<double>();
    l.max_deg = e.at("max").get<double>();
    if (e.value("kind", "ball") == "hinge") {
      l.kind = JointKind::hinge;
      l.bend_sign = e.value("bend_sign", 1);
      const auto axis = e.at("axis").get<std::vector<std::string>>();
      if (axis.size() != 2) throw ConfigError("hinge axis needs two joints");
      l.axis_from = chain.index_of(axis[0]);
      l.axis_to = chain.index_of(axis[1]);
      if (l.axis_from < 0 || l.axis_to < 0) throw ConfigError("unknown hinge axis joint");
    }
    limits.push_back(l);
  }
  // JSON objects are unordered; keep bone order.
  std::sort(limits.begin(), limits.end(),
            [](const AngleLimit& a, const AngleLimit& b) { return a.child < b.child; });
  AngleLimitTable table(std::move(limits));
  table.validate(chain);
  return table;
}

double measure_angle(const Pose3D& pose, const AngleLimit& limit) {
  const Vec3 a = pose.coords[limit.parent] - pose.coords[limit.joint];
  const Vec3 b = pose.coords[limit.child] - pose.coords[limit.joint];
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nan("");
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  const double angle = std::acos(c) * kDegPerRad;
  if (limit.kind == JointKind::ball) return angle;

  const Vec3 axis = pose.coords[limit.axis_from] - pose.coords[limit.axis_to];
  const double side = limit.bend_sign * a.cross(b).dot(axis);
  // Relative threshold: a straight limb has a numerically tiny cross product.
  const double scale = na * nb * axis.norm();
  if (side < -1e-12 * scale) return 360.0 - angle;
  return angle;
}

AngleCheck check_angle_limits(const Pose3D& pose, const KinematicChain& chain,
                              const AngleLimitTable& limits) {
  require_size(pose.size(), chain.num_joints(), "pose");
  AngleCheck out;
  for (const AngleLimit& l : limits.limits()) {
    const double angle = measure_angle(pose, l);
    if (std::isnan(angle)) {
      out.indeterminate.push_back(limit_name(l, chain));
      continue;
    }
    // Round-off slack so a perfectly straight limb measures within [.., 180].
    constexpr double kSlack = 1e-9;
    if (angle < l.min_deg - kSlack || angle > l.max_deg + kSlack) {
      out.violations.push_back({limit_name(l, chain), angle, l.min_deg, l.max_deg});
    }
  }
  return out;
}

}  // namespace napa
