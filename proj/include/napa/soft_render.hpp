#pragma once

#include "napa/bonemap.hpp"
#include "napa/skeleton.hpp"

#include <torch/torch.h>

namespace napa {

struct SoftBoneMap {
  torch::Tensor image;     // [B, 3, H, W]
  torch::Tensor coverage;  // [B, H, W], 1 - prod(1 - alpha)
};

// Differentiable bone map. Per bone alpha = sigmoid(k (1 - q)) with q the
// quadratic form of the hard region test; bones are composited back to front
// in bone order over the background. Bones with an invisible or coincident
// endpoint get alpha 0.
//
// coords:     [B, J, 2] or [J, 2] pixel coordinates (x = column, y = row).
// visible:    [B, J] or [J] bool, or undefined for all visible.
// background: [B, 3, H, W] or [3, H, W] image, or undefined for spec.background.
// The output dtype follows coords.
SoftBoneMap render_soft(const torch::Tensor& coords, const torch::Tensor& visible,
                        const KinematicChain& chain, const BoneMapSpec& spec,
                        const torch::Tensor& background = {});

torch::Tensor pose_to_tensor(const Pose2D& pose, torch::Dtype dtype = torch::kFloat32);  // [J, 2]
torch::Tensor visibility_to_tensor(const Pose2D& pose);                                    // [J] bool
Pose2D tensor_to_pose(const torch::Tensor& coords, const torch::Tensor& visible = {});

// [3] float tensor per palette entry, values byte / 255.
torch::Tensor palette_tensor(const BoneMapSpec& spec, torch::Dtype dtype = torch::kFloat32);

}  // namespace napa
