#pragma once

#include "napa/bonemap.hpp"
#include "napa/feature_extractor.hpp"
#include "napa/nets.hpp"
#include "napa/skeleton.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace napa {

struct PipelineConfig {
  int image_size = 224;
  TransformNetConfig transform;
  PoseNetConfig pose;
  DepthNetConfig depth;
  LossNetworkConfig loss_net;
  BoneMapSpec bonemap;  // height and width follow image_size
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

// Net names used for checkpoint files and stage membership.
inline constexpr const char* kStylizer = "stylizer";
inline constexpr const char* kLossNet = "loss_network";
inline constexpr const char* kPoseNet = "pose_net";
inline constexpr const char* kDepthNet = "depth_net";
inline constexpr const char* kReconstructor = "reconstructor";
inline constexpr const char* kLossNet2 = "loss_network_2";
const std::vector<std::string>& all_net_names();

// F (stylizer), G (pose), G' (depth), F' (reconstructor) and the loss
// networks, plus bone statistics and training progress. Copies share modules.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config = {});

  const PipelineConfig& config() const { return config_; }

  TransformNet stylizer{nullptr};
  PoseNet pose_net{nullptr};
  DepthNet depth_net{nullptr};
  LossNetwork loss_net{nullptr};
  TransformNet reconstructor{nullptr};  // set by init_self_supervision
  LossNetwork loss_net2{nullptr};

  std::vector<Vec3> bone_mean;
  std::vector<Vec3> bone_std;
  bool has_bone_statistics = false;
  int completed_stage = 0;

  // F' starts as a copy of F; the second loss network as a copy of the first.
  void init_self_supervision();
  bool has_self_supervision() const { return !reconstructor.is_empty(); }

  // Null for nets that do not exist yet.
  torch::nn::Module* net(const std::string& name);
  void set_bone_statistics(const std::vector<Pose3D>& poses);

  // Inference helpers: eval mode, no gradients. Images [N, 3, S, S] with S
  // the configured image size; anything else throws ConfigError.
  torch::Tensor stylize(const torch::Tensor& images);
  PoseOutput predict_2d(const torch::Tensor& images);
  // Hard bone map of each 2D pose -> G' -> depth_forward.
  std::vector<Pose3D> lift(const std::vector<Pose2D>& poses);
  // O' = F'(soft bone map of coords composited over the style image).
  torch::Tensor reconstruct(const torch::Tensor& coords, const torch::Tensor& visible,
                            const torch::Tensor& style);

  // Directory bundle: one torch archive per net plus metadata.json.
  void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
  // Throws Error when the directory is not a compatible checkpoint.
  static Pipeline load(const std::filesystem::path& dir);

 private:
  void check_size(const torch::Tensor& images) const;
  PipelineConfig config_;
};

// FNV-1a over parameter and buffer names and bytes.
std::uint64_t module_hash(torch::nn::Module& module);

}  // namespace napa
