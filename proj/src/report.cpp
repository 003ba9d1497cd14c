#include "napa/report.hpp"

#include "napa/error.hpp"
#include "napa/image_io.hpp"
#include "napa/soft_render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace napa {

using nlohmann::json;

namespace {

json percent_or_null(const GroupScore& g) {
  const double p = g.percent();
  return std::isnan(p) ? json(nullptr) : json(p);
}

}  // namespace

json EvalReport::to_json() const {
  json rows = json::object();
  json counts = json::object();
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    rows[kGroupNames[g]] = percent_or_null(pckh.groups[g]);
    counts[kGroupNames[g]] = {{"correct", pckh.groups[g].correct}, {"counted", pckh.groups[g].counted}};
  }
  rows["Total"] = percent_or_null(pckh.total);
  counts["Total"] = {{"correct", pckh.total.correct}, {"counted", pckh.total.counted}};

  json per_image = json::array();
  const std::size_t joints = image_ids.empty() ? 0 : pckh.distances.size() / image_ids.size();
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    json d = json::array(), c = json::array();
    for (std::size_t j = 0; j < joints; ++j) {
      const double v = pckh.distances[i * joints + j];
      d.push_back(std::isnan(v) ? json(nullptr) : json(v));
      c.push_back(static_cast<bool>(pckh.correct[i * joints + j]));
    }
    per_image.push_back({{"image_id", image_ids[i]}, {"distances", d}, {"correct", c}});
  }
  json j = {{"metric", "PCKh"},
            {"threshold_ratio", threshold_ratio},
            {"rows", rows},
            {"counts", counts},
            {"images", image_ids.size()},
            {"per_image", per_image},
            {"metadata", metadata}};
  if (mpjpe) j["mpjpe"] = *mpjpe;
  if (pa_mpjpe) j["pa_mpjpe"] = *pa_mpjpe;
  return j;
}

std::string EvalReport::to_table(const std::string& label) const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "PCKh@%.2f (%%)", threshold_ratio);
  const int first = std::max<int>(static_cast<int>(label.size()), 16);
  out << std::string(buf) << std::string(static_cast<std::size_t>(std::max(0, first - static_cast<int>(std::string(buf).size()))), ' ');
  for (const char* g : kGroupNames) {
    std::snprintf(buf, sizeof buf, " %9s", g);
    out << buf;
  }
  out << "     Total\n";
  out << label << std::string(static_cast<std::size_t>(first - static_cast<int>(label.size())), ' ');
  auto cell = [&](const GroupScore& g) {
    const double p = g.percent();
    if (std::isnan(p)) {
      std::snprintf(buf, sizeof buf, " %9s", "-");
    } else {
      std::snprintf(buf, sizeof buf, " %9.1f", p);
    }
    out << buf;
  };
  for (const auto& g : pckh.groups) cell(g);
  cell(pckh.total);
  out << '\n';
  if (mpjpe) {
    std::snprintf(buf, sizeof buf, "MPJPE %.2f", *mpjpe);
    out << buf;
    if (pa_mpjpe) {
      std::snprintf(buf, sizeof buf, "  PA-MPJPE %.2f", *pa_mpjpe);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

EvalReport evaluate_predictions(const std::vector<Prediction>& predictions, const std::vector<SampleRecord>& records,
                                double threshold_ratio) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id[p.image_id] = &p;
  EvalReport r;
  r.threshold_ratio = threshold_ratio;
  double sum = 0.0, sum_pa = 0.0;
  std::size_t n3d = 0;
  bool pa_ok = true;
  for (const auto& rec : records) {
    const auto it = by_id.find(rec.image_id);
    if (it == by_id.end()) throw ConfigError("no prediction for image " + rec.image_id);
    const Prediction& p = *it->second;
    accumulate(r.pckh, pckh(p.pose, rec.keypoints, rec.head_size(), threshold_ratio));
    r.image_ids.push_back(rec.image_id);
    if (rec.depth_rel && p.depth_rel) {
      const Pose3D gt = rec.pose3d();
      const Pose3D pred = Pose3D::lift(p.pose, *p.depth_rel);
      sum += mpjpe(pred, gt, false);
      try {
        sum_pa += mpjpe(pred, gt, true);
      } catch (const DegenerateError&) {
        pa_ok = false;
      }
      ++n3d;
    }
  }
  if (n3d > 0) {
    r.mpjpe = sum / static_cast<double>(n3d);
    if (pa_ok) r.pa_mpjpe = sum_pa / static_cast<double>(n3d);
  }
  return r;
}

std::vector<Prediction> average_predictions(const std::vector<std::vector<Prediction>>& per_model) {
  if (per_model.empty()) throw ConfigError("ensemble needs at least one model");
  std::vector<Prediction> out = per_model.front();
  const double n = static_cast<double>(per_model.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < out[i].pose.size(); ++j) {
      Vec2 sum = Vec2::Zero();
      for (const auto& m : per_model) {
        if (m.size() != out.size() || m[i].image_id != out[i].image_id) {
          throw ConfigError("ensemble members predicted different images");
        }
        sum += m[i].pose.coords[j];
      }
      out[i].pose.coords[j] = sum / n;
    }
    if (out[i].depth_rel) {
      for (std::size_t j = 0; j < out[i].depth_rel->size(); ++j) {
        double z = 0.0;
        for (const auto& m : per_model) z += m[i].depth_rel ? (*m[i].depth_rel)[j] : 0.0;
        (*out[i].depth_rel)[j] = z / n;
      }
    }
  }
  return out;
}

std::vector<Prediction> predict_records(Pipeline& pipeline, const std::filesystem::path& manifest,
                                        const std::vector<SampleRecord>& records, bool with_depth) {
  const int size = pipeline.config().image_size;
  std::vector<Prediction> out;
  const std::size_t chunk = 16;
  for (std::size_t start = 0; start < records.size(); start += chunk) {
    const std::size_t end = std::min(records.size(), start + chunk);
    const std::vector<SampleRecord> part(records.begin() + static_cast<long>(start), records.begin() + static_cast<long>(end));
    const auto samples = load_samples(manifest, part, size);
    std::vector<torch::Tensor> imgs;
    for (const auto& s : samples) imgs.push_back(s.image);
    const auto coords = pipeline.predict_2d(torch::stack(imgs)).coords;
    std::vector<Pose2D> at_input;
    for (std::size_t i = 0; i < samples.size(); ++i) at_input.push_back(tensor_to_pose(coords[static_cast<long>(i)]));
    std::vector<Pose3D> lifted;
    if (with_depth) lifted = pipeline.lift(at_input);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Prediction p;
      p.image_id = samples[i].image_id;
      p.pose = at_input[i];
      for (auto& c : p.pose.coords) c = Vec2(c.x() / samples[i].scale_x, c.y() / samples[i].scale_y);
      if (with_depth) {
        const double sz = 0.5 * (samples[i].scale_x + samples[i].scale_y);
        std::vector<double> z;
        for (const auto& c : lifted[i].coords) z.push_back(c.z() / sz);
        p.depth_rel = z;
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.image_id = j.at("image_id").get<std::string>();
      const auto kp = j.at("keypoints_2d");
      if (kp.size() != kNumJoints) throw ParseError("expected 18 keypoints", number);
      for (std::size_t k = 0; k < kNumJoints; ++k) {
        p.pose.coords[k] = Vec2(kp[k].at(0).get<double>(), kp[k].at(1).get<double>());
        p.pose.visible[k] = kp[k].size() < 3 || kp[k].at(2).get<double>() != 0.0;
      }
      if (j.contains("depth_rel")) p.depth_rel = j.at("depth_rel").get<std::vector<double>>();
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), number);
    }
  }
  return out;
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write predictions " + path.string());
  for (const auto& p : predictions) {
    json kp = json::array();
    for (std::size_t k = 0; k < p.pose.size(); ++k) {
      kp.push_back({p.pose.coords[k].x(), p.pose.coords[k].y(), p.pose.visible[k] ? 1 : 0});
    }
    json j = {{"image_id", p.image_id}, {"keypoints_2d", kp}};
    if (p.depth_rel) j["depth_rel"] = *p.depth_rel;
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> predictions_from_records(const std::vector<SampleRecord>& records) {
  std::vector<Prediction> out;
  for (const auto& r : records) out.push_back({r.image_id, r.keypoints, r.depth_rel});
  return out;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace napa
