#include "napa/data.hpp"

#include "napa/error.hpp"
#include "napa/image_io.hpp"
#include "napa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace napa {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Domain d) {
  switch (d) {
    case Domain::real: return "real";
    case Domain::art: return "art";
    case Domain::stylized: return "stylized";
  }
  return "real";
}

Domain domain_from_string(const std::string& s) {
  if (s == "real") return Domain::real;
  if (s == "art") return Domain::art;
  if (s == "stylized") return Domain::stylized;
  throw ValidationError({FieldError{"domain", "expected real, art or stylized, got '" + s + "'"}});
}

Pose3D SampleRecord::pose3d() const {
  return Pose3D::lift(keypoints, depth_rel.value_or(std::vector<double>(keypoints.size(), 0.0)));
}

double SampleRecord::head_size() const { return head_size_from_box(head_box); }

json to_json(const SampleRecord& r) {
  json kp = json::array();
  for (std::size_t j = 0; j < r.keypoints.size(); ++j) {
    kp.push_back({r.keypoints.coords[j].x(), r.keypoints.coords[j].y(), r.keypoints.visible[j] ? 1 : 0});
  }
  json j = {{"image_id", r.image_id},
            {"image", r.image},
            {"keypoints_2d", kp},
            {"head_box", r.head_box},
            {"domain", to_string(r.domain)}};
  if (r.depth_rel) j["depth_rel"] = *r.depth_rel;
  if (r.style_id) j["style_id"] = *r.style_id;
  if (r.width) j["width"] = *r.width;
  if (r.height) j["height"] = *r.height;
  return j;
}

namespace {

template <typename T>
T required(const json& j, const char* key, std::vector<FieldError>& errors) {
  if (!j.contains(key)) {
    errors.push_back({key, "missing"});
    return T{};
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    errors.push_back({key, "wrong type"});
    return T{};
  }
}

std::vector<FieldError> prefixed(const std::vector<FieldError>& in, const std::string& prefix) {
  std::vector<FieldError> out;
  for (const auto& f : in) out.push_back({prefix + f.path, f.message});
  return out;
}

}  // namespace

void validate_record(const SampleRecord& r) {
  const auto& chain = KinematicChain::standard();
  std::vector<FieldError> errors;
  if (r.image_id.empty()) errors.push_back({"image_id", "empty"});
  if (r.keypoints.size() != chain.num_joints()) {
    errors.push_back({"keypoints_2d", "expected " + std::to_string(chain.num_joints()) + " joints"});
  } else {
    for (std::size_t j = 0; j < r.keypoints.size(); ++j) {
      const Vec2& c = r.keypoints.coords[j];
      const std::string path = "keypoints_2d/" + chain.name(static_cast<int>(j));
      if (!std::isfinite(c.x()) || !std::isfinite(c.y())) {
        errors.push_back({path, "not finite"});
        continue;
      }
      if (!r.keypoints.visible[j]) continue;
      const bool below = c.x() < 0 || c.y() < 0;
      const bool above = (r.width && c.x() > *r.width - 1) || (r.height && c.y() > *r.height - 1);
      if (below || above) errors.push_back({path, "visible keypoint outside the image"});
    }
  }
  if (r.depth_rel) {
    if (r.depth_rel->size() != chain.num_joints()) {
      errors.push_back({"depth_rel", "expected " + std::to_string(chain.num_joints()) + " values"});
    } else {
      if ((*r.depth_rel)[static_cast<std::size_t>(chain.root())] != 0.0) {
        errors.push_back({"depth_rel/pelvis", "pelvis depth must be 0"});
      }
      for (std::size_t j = 0; j < r.depth_rel->size(); ++j) {
        if (!std::isfinite((*r.depth_rel)[j])) {
          errors.push_back({"depth_rel/" + chain.name(static_cast<int>(j)), "not finite"});
        }
      }
    }
  }
  if (!(r.head_box[2] >= 0) || !(r.head_box[3] >= 0)) errors.push_back({"head_box", "negative size"});
  if ((r.width && *r.width <= 0) || (r.height && *r.height <= 0)) {
    errors.push_back({"width", "image size must be positive"});
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
}

SampleRecord record_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError({FieldError{"", "record must be a JSON object"}});
  std::vector<FieldError> errors;
  SampleRecord r;
  r.image_id = required<std::string>(j, "image_id", errors);
  r.image = required<std::string>(j, "image", errors);
  const auto kp = required<std::vector<std::vector<double>>>(j, "keypoints_2d", errors);
  if (j.contains("keypoints_2d") && kp.size() == r.keypoints.size()) {
    for (std::size_t i = 0; i < kp.size(); ++i) {
      if (kp[i].size() != 3) {
        errors.push_back({"keypoints_2d/" + std::to_string(i), "expected [u, v, visible]"});
        continue;
      }
      r.keypoints.coords[i] = Vec2(kp[i][0], kp[i][1]);
      r.keypoints.visible[i] = kp[i][2] != 0.0;
    }
  } else if (j.contains("keypoints_2d")) {
    errors.push_back({"keypoints_2d", "expected " + std::to_string(r.keypoints.size()) + " joints"});
  }
  r.head_box = required<std::array<double, 4>>(j, "head_box", errors);
  const auto domain = required<std::string>(j, "domain", errors);
  if (j.contains("domain")) {
    try {
      r.domain = domain_from_string(domain);
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.fields().begin(), e.fields().end());
    }
  }
  try {
    if (j.contains("depth_rel")) r.depth_rel = j.at("depth_rel").get<std::vector<double>>();
    if (j.contains("style_id")) r.style_id = j.at("style_id").get<std::string>();
    if (j.contains("width")) r.width = j.at("width").get<int>();
    if (j.contains("height")) r.height = j.at("height").get<int>();
  } catch (const json::exception&) {
    errors.push_back({"", "optional field has the wrong type"});
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  validate_record(r);
  return r;
}

std::vector<SampleRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), number);
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(prefixed(e.fields(), "line " + std::to_string(number) + "/"));
    }
  }
  return out;
}

void save_manifest(const fs::path& path, const std::vector<SampleRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

fs::path resolve_image(const fs::path& manifest, const SampleRecord& record) {
  const fs::path p(record.image);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

std::vector<Sample> load_samples(const fs::path& manifest, const std::vector<SampleRecord>& records,
                                 int size) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto image = load_image(resolve_image(manifest, r));
    const Preprocessed p = preprocess(image, r.keypoints, size);
    Sample s;
    s.image_id = r.image_id;
    s.image = p.image;
    s.pose = p.pose;
    s.scale_x = p.scale_x;
    s.scale_y = p.scale_y;
    s.head_size = std::hypot(r.head_box[2] * p.scale_x, r.head_box[3] * p.scale_y);
    s.domain = r.domain;
    if (r.depth_rel) {
      // Depth is in pixel-equivalent units; use the mean scale for z.
      const double sz = 0.5 * (p.scale_x + p.scale_y);
      std::vector<double> z(*r.depth_rel);
      for (double& v : z) v *= sz;
      s.pose3d = Pose3D::lift(p.pose, z);
    }
    out.push_back(std::move(s));
  }
  return out;
}

StylePool::StylePool(std::vector<torch::Tensor> images, std::vector<std::string> ids,
                     std::uint64_t seed)
    : images_(std::move(images)), ids_(std::move(ids)), rng_(seed) {
  if (ids_.size() != images_.size()) throw ConfigError("style pool: ids and images differ in count");
}

StylePool StylePool::from_directory(const fs::path& dir, int size, std::uint64_t seed) {
  if (!fs::is_directory(dir)) throw Error("style directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<torch::Tensor> images;
  std::vector<std::string> ids;
  for (const auto& f : files) {
    images.push_back(resize_image(load_image(f), size, size));
    ids.push_back(f.stem().string());
  }
  return StylePool(std::move(images), std::move(ids), seed);
}

std::size_t StylePool::sample_index() {
  if (images_.empty()) throw Error("style pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
  return pick(rng_);
}

}  // namespace napa
