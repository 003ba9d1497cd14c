#include "napa/annotation.hpp"

#include "napa/bonemap.hpp"
#include "napa/error.hpp"
#include "napa/image_io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <mutex>

namespace napa {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::todo: return "todo";
    case TaskStatus::in_progress: return "in_progress";
    case TaskStatus::done: return "done";
  }
  return "todo";
}

TaskStatus task_status_from_string(const std::string& s) {
  if (s == "todo") return TaskStatus::todo;
  if (s == "in_progress") return TaskStatus::in_progress;
  if (s == "done") return TaskStatus::done;
  throw ConfigError("status must be todo, in_progress or done, got '" + s + "'");
}

namespace {

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SampleRecord as_sample(const AnnotationRecord& r) {
  SampleRecord s;
  s.image_id = r.image_id;
  s.image = r.image;
  s.keypoints = r.keypoints;
  s.depth_rel = r.depth_rel;
  s.head_box = r.head_box;
  s.width = r.width;
  s.height = r.height;
  return s;
}

}  // namespace

json to_json(const AnnotationRecord& r) {
  json j = to_json(as_sample(r));
  j.erase("domain");
  j["status"] = to_string(r.status);
  j["version"] = r.version;
  j["annotator"] = r.annotator;
  j["created_at"] = r.created_at;
  j["updated_at"] = r.updated_at;
  return j;
}

AnnotationRecord annotation_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError({FieldError{"", "record must be a JSON object"}});
  json sample = j;
  if (!sample.contains("image")) sample["image"] = "";
  sample["domain"] = "real";
  std::vector<FieldError> errors;
  SampleRecord s;
  try {
    s = record_from_json(sample);
  } catch (const ValidationError& e) {
    errors = e.fields();
  }
  AnnotationRecord r;
  r.image_id = s.image_id;
  r.image = s.image;
  r.keypoints = s.keypoints;
  if (s.depth_rel) r.depth_rel = *s.depth_rel;
  r.head_box = s.head_box;
  r.width = s.width;
  r.height = s.height;
  try {
    if (j.contains("status")) r.status = task_status_from_string(j.at("status").get<std::string>());
  } catch (const std::exception&) {
    errors.push_back({"status", "expected todo, in_progress or done"});
  }
  try {
    r.version = j.value("version", 1);
    r.annotator = j.value("annotator", "");
    r.created_at = j.value("created_at", "");
    r.updated_at = j.value("updated_at", "");
  } catch (const json::exception&) {
    errors.push_back({"version", "wrong type in version, annotator or timestamps"});
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return r;
}

void validate_annotation(const AnnotationRecord& r) { validate_record(as_sample(r)); }

json PoseValidation::to_json() const {
  json v = json::array();
  for (const auto& a : angles.violations) {
    v.push_back({{"name", a.name}, {"measured_deg", a.measured_deg}, {"min_deg", a.min_deg}, {"max_deg", a.max_deg}});
  }
  return {{"projection_ok", projection_ok},
          {"changed_2d", changed_2d},
          {"changed_joints", changed_joints},
          {"angle_violations", v},
          {"indeterminate", angles.indeterminate}};
}

PoseValidation validate_pose(const AnnotationRecord& record, const AnnotationRecord* stored,
                             const AngleLimitTable& limits) {
  const auto& chain = KinematicChain::standard();
  PoseValidation v;
  // (u, v) of the implied 3D pose are the stored keypoints themselves.
  v.projection_ok = true;
  if (stored) {
    for (std::size_t j = 0; j < record.keypoints.size(); ++j) {
      if (record.keypoints.coords[j] != stored->keypoints.coords[j] ||
          record.keypoints.visible[j] != stored->keypoints.visible[j]) {
        v.changed_joints.push_back(chain.name(static_cast<int>(j)));
      }
    }
    v.changed_2d = !v.changed_joints.empty();
  }
  v.angles = check_angle_limits(record.pose3d(), chain, limits);
  return v;
}

// ---------------------------------------------------------------------------

AnnotationStore::AnnotationStore(fs::path journal, AngleLimitTable limits)
    : journal_(std::move(journal)), limits_(std::move(limits)) {
  if (journal_.has_parent_path()) fs::create_directories(journal_.parent_path());
  if (fs::exists(journal_)) {
    std::ifstream in(journal_);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      AnnotationRecord r;
      try {
        r = annotation_from_json(json::parse(line));
      } catch (const json::exception& e) {
        // A torn final line from an interrupted append is dropped.
        if (in.peek() == EOF) break;
        throw ParseError(e.what(), number);
      }
      auto it = records_.find(r.image_id);
      if (it == records_.end() || it->second.version < r.version) records_[r.image_id] = r;
    }
  }
  // Compact: rewrite the latest snapshot per image, then swap in atomically.
  const fs::path tmp = journal_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, r] : records_) out << to_json(r).dump() << '\n';
    if (!out) throw Error("cannot write journal " + tmp.string());
  }
  fs::rename(tmp, journal_);
  out_.open(journal_, std::ios::app);
  if (!out_) throw Error("cannot open journal " + journal_.string());
}

void AnnotationStore::append(const AnnotationRecord& r) {
  out_ << to_json(r).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("journal write failed");
}

std::size_t AnnotationStore::import_manifest(const fs::path& manifest) {
  const auto samples = load_manifest(manifest);
  std::unique_lock lock(mutex_);
  std::size_t added = 0;
  const std::string now = now_iso8601();
  for (const auto& s : samples) {
    if (records_.count(s.image_id)) continue;
    AnnotationRecord r;
    r.image_id = s.image_id;
    r.image = fs::absolute(resolve_image(manifest, s)).string();
    r.keypoints = s.keypoints;
    if (s.depth_rel) r.depth_rel = *s.depth_rel;
    r.head_box = s.head_box;
    r.width = s.width;
    r.height = s.height;
    if (!r.width || !r.height) {
      const auto img = load_image(r.image);
      r.width = static_cast<int>(img.size(2));
      r.height = static_cast<int>(img.size(1));
    }
    r.created_at = r.updated_at = now;
    append(r);
    records_[r.image_id] = r;
    ++added;
  }
  return added;
}

std::optional<AnnotationRecord> AnnotationStore::get(const std::string& image_id) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find(image_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<AnnotationRecord> AnnotationStore::list(std::optional<TaskStatus> status) const {
  std::shared_lock lock(mutex_);
  std::vector<AnnotationRecord> out;
  for (const auto& [id, r] : records_)
    if (!status || r.status == *status) out.push_back(r);
  return out;
}

std::optional<AnnotationRecord> AnnotationStore::next_task(std::optional<TaskStatus> status) const {
  std::shared_lock lock(mutex_);
  for (const auto& [id, r] : records_)  // std::map iterates in id order
    if (!status || r.status == *status) return r;
  return std::nullopt;
}

int AnnotationStore::save(const AnnotationRecord& record, int expected_version) {
  std::unique_lock lock(mutex_);
  const auto it = records_.find(record.image_id);
  if (it == records_.end()) throw Error("unknown image id " + record.image_id);
  const AnnotationRecord& stored = it->second;
  if (stored.version != expected_version) {
    throw ConflictError("version conflict on " + record.image_id + ": stored " + std::to_string(stored.version) +
                        ", expected " + std::to_string(expected_version));
  }
  AnnotationRecord next = record;
  next.image = stored.image;
  next.width = stored.width;
  next.height = stored.height;
  next.created_at = stored.created_at;
  validate_annotation(next);
  if (next.status == TaskStatus::done) {
    const auto check = check_angle_limits(next.pose3d(), KinematicChain::standard(), limits_);
    if (!check.violations.empty()) {
      std::vector<FieldError> errors;
      for (const auto& v : check.violations) {
        errors.push_back({"angles/" + v.name, "angle " + std::to_string(v.measured_deg) + " outside [" +
                                                  std::to_string(v.min_deg) + ", " + std::to_string(v.max_deg) + "]"});
      }
      throw ValidationError(std::move(errors));
    }
  }
  next.version = stored.version + 1;
  next.updated_at = now_iso8601();
  append(next);
  it->second = next;
  return next.version;
}

PoseValidation AnnotationStore::validate(const AnnotationRecord& record) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find(record.image_id);
  return validate_pose(record, it == records_.end() ? nullptr : &it->second, limits_);
}

// ---------------------------------------------------------------------------

std::vector<double> lift_initial_guess(const AnnotationRecord& record, Pipeline* pipeline) {
  std::vector<double> zeros(kNumJoints, 0.0);
  if (!pipeline) return zeros;
  if (!pipeline->has_bone_statistics) throw ConfigError("checkpoint has no trained depth net (no bone statistics)");
  if (!record.width || !record.height) throw ConfigError("lift needs the image size of " + record.image_id);
  const double size = pipeline->config().image_size;
  const double sx = size / *record.width, sy = size / *record.height;
  Pose2D scaled = record.keypoints;
  for (auto& c : scaled.coords) c = Vec2(c.x() * sx, c.y() * sy);
  const Pose3D lifted = pipeline->lift({scaled}).front();
  const double s = 0.5 * (sx + sy);
  std::vector<double> z(kNumJoints);
  for (std::size_t j = 0; j < kNumJoints; ++j) z[j] = lifted.coords[j].z() / s;
  z[static_cast<std::size_t>(KinematicChain::standard().root())] = 0.0;
  return z;
}

}  // namespace napa
