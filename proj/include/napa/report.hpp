#pragma once

#include "napa/data.hpp"
#include "napa/metrics.hpp"
#include "napa/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace napa {

// A prediction in original image coordinates.
struct Prediction {
  std::string image_id;
  Pose2D pose;
  std::optional<std::vector<double>> depth_rel;
};

struct EvalReport {
  PckhResult pckh;
  double threshold_ratio = 0.25;
  std::vector<std::string> image_ids;  // order of the per-joint distances
  std::optional<double> mpjpe;
  std::optional<double> pa_mpjpe;
  nlohmann::json metadata = nlohmann::json::object();

  // Rows Ankle .. Hip and Total as percentages, plus per-joint distances and
  // correctness so totals can be recomputed.
  nlohmann::json to_json() const;
  // Fixed-width table with one column per joint group and a Total column.
  std::string to_table(const std::string& label) const;
};

// Matches predictions to records by image_id. Missing predictions throw
// ConfigError. MPJPE fields are filled when both sides carry depth.
EvalReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                const std::vector<SampleRecord>& records, double threshold_ratio);

// Coordinate-wise mean across models (same images, same order).
std::vector<Prediction> average_predictions(const std::vector<std::vector<Prediction>>& per_model);

// Runs G (and G' for depth) at the pipeline input size and maps the result
// back to each record's original image coordinates.
std::vector<Prediction> predict_records(Pipeline& pipeline, const std::filesystem::path& manifest,
                                        const std::vector<SampleRecord>& records, bool with_depth);

// JSON lines: {"image_id", "keypoints_2d": [[u, v, visible], ...], "depth_rel"?}.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);
// Labels as predictions.
std::vector<Prediction> predictions_from_records(const std::vector<SampleRecord>& records);

// 16 hex digits, FNV-1a of the compact JSON dump.
std::string config_hash(const nlohmann::json& j);

}  // namespace napa
