#pragma once

#include "napa/skeleton.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace napa {

enum class Normalization { instance, batch };
std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

// Parameter count of a module (trainable or not), excluding buffers.
std::int64_t count_parameters(torch::nn::Module& module);

// ---------------------------------------------------------------------------
// Image transform net: 9x9 conv, two stride-2 convs, residual blocks, two
// nearest-upsample convs, 9x9 conv to a 3-channel residual. The output is
// sigmoid(logit(input) + residual), so a zero final layer maps an image to
// itself and every output lies in (0, 1).

struct TransformNetConfig {
  Normalization normalization = Normalization::instance;
  int channels = 16;  // width of the first stage; later stages use 2x and 4x
  int residual_blocks = 3;

  nlohmann::json to_json() const;
  static TransformNetConfig from_json(const nlohmann::json& j);
};

// 81*3c + c + 9*c*2c + 2c + 9*2c*4c + 4c + R*2*(9*16c^2 + 4c) + 9*4c*2c + 2c
// + 9*2c*c + c + 81*3c + 3, plus 2 affine parameters per normalised channel:
// 2*(c + 2c + 4c + R*2*4c + 2c + c).
std::int64_t transform_net_parameter_count(const TransformNetConfig& c);

class TransformNetImpl : public torch::nn::Module {
 public:
  explicit TransformNetImpl(TransformNetConfig config = {});
  // [N, 3, H, W] in [0, 1], H and W multiples of 4.
  torch::Tensor forward(const torch::Tensor& x);
  // First convolution, before its normalisation layer.
  torch::Tensor first_conv(const torch::Tensor& x);
  // The first normalisation layer alone (including its affine map).
  torch::Tensor first_norm(const torch::Tensor& pre_norm);
  const TransformNetConfig& config() const { return config_; }

 private:
  struct Layer {
    torch::nn::Conv2d conv{nullptr};
    torch::nn::AnyModule norm;
    int pad = 0;
    bool upsample = false;
  };
  Layer make(const std::string& name, int in, int out, int kernel, int stride, bool upsample);
  torch::Tensor apply(Layer& l, torch::Tensor x, bool relu);

  TransformNetConfig config_;
  std::vector<Layer> down_;
  std::vector<std::pair<Layer, Layer>> res_;
  std::vector<Layer> up_;
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(TransformNet);

// Copies every parameter and buffer of `from` into `to` (same config).
void copy_weights(torch::nn::Module& from, torch::nn::Module& to);

// ---------------------------------------------------------------------------
// Pose net: conv stem, `stride` = 2^k downsampling, residual blocks, 1x1 head
// to one heatmap per joint.

struct PoseNetConfig {
  Normalization normalization = Normalization::instance;
  int channels = 32;
  int downsample = 2;  // heatmap stride 2^downsample
  int residual_blocks = 3;
  int joints = static_cast<int>(kNumJoints);

  int stride() const { return 1 << downsample; }
  nlohmann::json to_json() const;
  static PoseNetConfig from_json(const nlohmann::json& j);
};

// stem 9*3c + c; each downsampling conv 9*c*c + c; R blocks 2*(9c^2 + c);
// head c*J + J; 2 affine parameters per normalised channel:
// 2c*(1 + downsample + 2R).
std::int64_t pose_net_parameter_count(const PoseNetConfig& c);

struct PoseOutput {
  torch::Tensor heatmaps;  // [N, J, Hh, Wh], each slice sums to 1
  torch::Tensor coords;    // [N, J, 2] input pixels, x = column
};

class PoseNetImpl : public torch::nn::Module {
 public:
  explicit PoseNetImpl(PoseNetConfig config = {});
  torch::Tensor forward(const torch::Tensor& x);  // heatmap logits
  const PoseNetConfig& config() const { return config_; }

 private:
  PoseNetConfig config_;
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(PoseNet);

// Heatmap cell (i, j) covers input pixels centred at ((j + 0.5) s - 0.5,
// (i + 0.5) s - 0.5) for stride s.
PoseOutput pose_forward(PoseNet& net, const torch::Tensor& images);

// ---------------------------------------------------------------------------
// Depth net: stride-2 conv encoder, 4x4 adaptive average pool, one fully
// connected layer to 17x3 standardised bone vectors.

struct DepthNetConfig {
  Normalization normalization = Normalization::instance;
  int channels = 16;
  int stages = 4;  // stage k has channels * 2^min(k, 2) outputs
  int bones = static_cast<int>(kNumBones);

  int width(int stage) const { return channels << std::min(stage, 2); }
  nlohmann::json to_json() const;
  static DepthNetConfig from_json(const nlohmann::json& j);
};

// sum_k 9*in_k*out_k + out_k + 2*out_k, then 16*out_last*3B + 3B.
std::int64_t depth_net_parameter_count(const DepthNetConfig& c);

class DepthNetImpl : public torch::nn::Module {
 public:
  explicit DepthNetImpl(DepthNetConfig config = {});
  torch::Tensor forward(const torch::Tensor& bonemaps);  // [N, B, 3]
  const DepthNetConfig& config() const { return config_; }

 private:
  DepthNetConfig config_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(DepthNet);

// De-standardise, rebuild joints from the pelvis at z = 0 and keep (u, v) of
// the 2D branch untouched: only z comes from the bone vectors.
Pose3D depth_forward(const std::vector<Vec3>& standardized, const Pose2D& pose2d,
                     const std::vector<Vec3>& mean, const std::vector<Vec3>& std,
                     const KinematicChain& chain = KinematicChain::standard());

std::vector<Vec3> bones_from_tensor(const torch::Tensor& t);  // [B, 3]
torch::Tensor bones_to_tensor(const std::vector<Vec3>& bones, torch::Dtype dtype = torch::kFloat32);

}  // namespace napa
