#pragma once

#include "napa/pipeline.hpp"

#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace napa::testing {

// Relative error between the analytic directional derivative of f at x along
// a random unit direction and its central difference.
inline double directional_fd_error(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                   const torch::Tensor& x0, std::uint64_t seed, double h = 1e-5) {
  torch::manual_seed(seed);
  auto dir = torch::randn_like(x0);
  dir = dir / dir.norm();
  auto x = x0.detach().clone().set_requires_grad(true);
  const auto y = f(x);
  const auto g = torch::autograd::grad({y}, {x})[0];
  const double analytic = (g * dir).sum().item<double>();
  torch::NoGradGuard guard;
  const double plus = f(x0 + h * dir).item<double>();
  const double minus = f(x0 - h * dir).item<double>();
  const double numeric = (plus - minus) / (2.0 * h);
  const double scale = std::max(std::abs(numeric), std::abs(analytic));
  return scale < 1e-12 ? 0.0 : std::abs(analytic - numeric) / scale;
}

// Small nets at a small size so a training step takes milliseconds.
inline PipelineConfig tiny_pipeline_config(int size = 32, std::uint64_t seed = 3) {
  nlohmann::json j = {{"image_size", size},
                      {"seed", seed},
                      {"transform", {{"channels", 4}, {"residual_blocks", 1}}},
                      {"pose", {{"channels", 8}, {"downsample", 1}, {"residual_blocks", 1}}},
                      {"depth", {{"channels", 4}, {"stages", 2}}},
                      {"loss_net", {{"widths", {4, 4, 8, 8, 8}}}}};
  return PipelineConfig::from_json(j);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("napa_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace napa::testing
