#pragma once

#include "napa/skeleton.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace napa {

enum class Domain { real, art, stylized };
std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

// One line of a JSON-lines manifest. `image` is relative to the manifest's
// directory unless absolute. `width`/`height` are optional; when present the
// visible keypoints are checked against them, otherwise only u, v >= 0.
struct SampleRecord {
  std::string image_id;
  std::string image;
  Pose2D keypoints;
  std::optional<std::vector<double>> depth_rel;
  std::array<double, 4> head_box{0, 0, 0, 0};
  Domain domain = Domain::real;
  std::optional<std::string> style_id;
  std::optional<int> width;
  std::optional<int> height;

  Pose3D pose3d() const;  // depth 0 where absent
  double head_size() const;
};

nlohmann::json to_json(const SampleRecord& r);
// Throws ValidationError (field paths such as "keypoints_2d/l_wrist") on
// schema or invariant violations.
SampleRecord record_from_json(const nlohmann::json& j);
void validate_record(const SampleRecord& r);

// Empty file gives an empty list. Malformed lines raise ParseError; invalid
// records raise ValidationError with paths prefixed by "line N/".
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

std::filesystem::path resolve_image(const std::filesystem::path& manifest,
                                    const SampleRecord& record);

// A record loaded into memory at the network input size.
struct Sample {
  std::string image_id;
  torch::Tensor image;  // [3, size, size]
  Pose2D pose;          // rescaled to the input size
  std::optional<Pose3D> pose3d;
  double head_size = 0.0;  // rescaled
  double scale_x = 1.0;
  double scale_y = 1.0;
  Domain domain = Domain::real;
};

std::vector<Sample> load_samples(const std::filesystem::path& manifest,
                                 const std::vector<SampleRecord>& records, int size);

// Uniform sampling over a fixed set of style images with a seeded stream.
class StylePool {
 public:
  StylePool() = default;
  StylePool(std::vector<torch::Tensor> images, std::vector<std::string> ids, std::uint64_t seed);
  // Sorted listing of PNG/JPEG/BMP files, each resized to size x size.
  static StylePool from_directory(const std::filesystem::path& dir, int size, std::uint64_t seed);

  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  const torch::Tensor& image(std::size_t i) const { return images_.at(i); }
  const std::string& id(std::size_t i) const { return ids_.at(i); }

  // Throws Error on an empty pool.
  std::size_t sample_index();
  const torch::Tensor& sample() { return images_[sample_index()]; }

 private:
  std::vector<torch::Tensor> images_;
  std::vector<std::string> ids_;
  std::mt19937_64 rng_;
};

}  // namespace napa
