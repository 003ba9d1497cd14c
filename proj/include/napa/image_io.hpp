#pragma once

#include "napa/bonemap.hpp"
#include "napa/skeleton.hpp"

#include <torch/torch.h>

#include <filesystem>

namespace napa {

// Images travel as float32 [3, H, W] RGB tensors with values in [0, 1].

torch::Tensor load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const torch::Tensor& image);
void save_png(const std::filesystem::path& path, const BoneMap& map);

torch::Tensor to_tensor(const BoneMap& map);
// Rounds to the nearest byte after clamping to [0, 1].
std::vector<std::uint8_t> to_bytes(const torch::Tensor& image);

// Bilinear resize; returns the input unchanged when it already has the size.
torch::Tensor resize_image(const torch::Tensor& image, int height, int width);

struct Preprocessed {
  torch::Tensor image;
  Pose2D pose;
  double scale_x = 1.0;
  double scale_y = 1.0;
};

// Resize to size x size and rescale keypoints by the same factors
// (u' = u * size / W, v' = v * size / H).
Preprocessed preprocess(const torch::Tensor& image, const Pose2D& pose, int size = 224);

}  // namespace napa
