#pragma once

#include "napa/data.hpp"
#include "napa/pipeline.hpp"
#include "napa/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace napa {

enum class TaskStatus { todo, in_progress, done };
std::string to_string(TaskStatus s);
TaskStatus task_status_from_string(const std::string& s);  // ConfigError when unknown

// 2.5D annotation: (u, v) per joint plus depth relative to the pelvis. The
// projection of the implied 3D pose is (u, v) by construction.
struct AnnotationRecord {
  std::string image_id;
  std::string image;  // absolute path
  Pose2D keypoints;
  std::vector<double> depth_rel = std::vector<double>(kNumJoints, 0.0);
  std::array<double, 4> head_box{0, 0, 0, 0};
  TaskStatus status = TaskStatus::todo;
  int version = 1;
  std::string annotator;
  std::string created_at;
  std::string updated_at;
  std::optional<int> width;
  std::optional<int> height;

  Pose3D pose3d() const { return Pose3D::lift(keypoints, depth_rel); }
};

nlohmann::json to_json(const AnnotationRecord& r);
// Field errors use paths such as "keypoints_2d/l_wrist" and "depth_rel/pelvis".
AnnotationRecord annotation_from_json(const nlohmann::json& j);
// Invariants shared by every save: 18 joints, finite values, pelvis depth 0,
// visible keypoints inside the image when its size is known.
void validate_annotation(const AnnotationRecord& r);

struct PoseValidation {
  bool projection_ok = true;
  bool changed_2d = false;
  std::vector<std::string> changed_joints;  // 2D edits against the stored record
  AngleCheck angles;

  nlohmann::json to_json() const;
};

// `stored` is the current server copy, if any.
PoseValidation validate_pose(const AnnotationRecord& record, const AnnotationRecord* stored,
                             const AngleLimitTable& limits);

// Versioned records persisted as a JSON-lines journal of full snapshots. The
// journal is compacted (latest version per image) when the store opens.
// Writers are serialised; a save with a stale expected_version throws
// ConflictError and changes nothing.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path journal,
                           AngleLimitTable limits = AngleLimitTable::defaults(KinematicChain::standard()));

  // Adds unseen image ids from a manifest as todo tasks at version 1. Returns
  // how many were added.
  std::size_t import_manifest(const std::filesystem::path& manifest);

  std::optional<AnnotationRecord> get(const std::string& image_id) const;
  std::vector<AnnotationRecord> list(std::optional<TaskStatus> status) const;
  // Lowest image id with the given status (any status when empty).
  std::optional<AnnotationRecord> next_task(std::optional<TaskStatus> status) const;

  // Stores `record` as version expected_version + 1 and returns it. Unknown
  // ids throw Error; schema or invariant violations, and done records with
  // angle violations, throw ValidationError. The image path and creation time
  // are kept from the stored copy.
  int save(const AnnotationRecord& record, int expected_version);

  PoseValidation validate(const AnnotationRecord& record) const;
  const AngleLimitTable& limits() const { return limits_; }
  const std::filesystem::path& journal_path() const { return journal_; }

 private:
  void append(const AnnotationRecord& r);

  std::filesystem::path journal_;
  AngleLimitTable limits_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, AnnotationRecord> records_;
  std::ofstream out_;
};

// Depth proposal for an annotation: zeros without a pipeline; otherwise the
// depth net on the hard bone map of the record's 2D pose at the pipeline
// input size, rescaled to the record's pixel units. Pelvis is always 0.
// Throws ConfigError when the pipeline has no fitted bone statistics.
std::vector<double> lift_initial_guess(const AnnotationRecord& record, Pipeline* pipeline);

}  // namespace napa
