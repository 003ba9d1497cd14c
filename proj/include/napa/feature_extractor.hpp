#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace napa {

using FeatureMap = std::map<std::string, torch::Tensor>;

// Image batch [N, 3, H, W] in [0, 1] -> named activation maps [N, C, H', W'].
// Implementations must not update internal statistics during extraction.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureMap extract(const torch::Tensor& images, const std::vector<std::string>& layers) = 0;
};

// Convolution stack with the layer layout of VGG-19 (blocks of 2, 2, 4, 4, 4
// 3x3 convolutions separated by 2x2 max pooling) and configurable widths.
// Layers are named relu<block>_<index>. Weights are either He-initialised
// from `seed` or read from `weights` (a torch::save archive of this module).
struct LossNetworkConfig {
  std::vector<int> widths{16, 32, 48, 64, 64};
  std::uint64_t seed = 7;
  std::string weights;

  nlohmann::json to_json() const;
  static LossNetworkConfig from_json(const nlohmann::json& j);
};

class LossNetworkImpl : public torch::nn::Module, public FeatureExtractor {
 public:
  explicit LossNetworkImpl(LossNetworkConfig config = {});

  FeatureMap extract(const torch::Tensor& images, const std::vector<std::string>& layers) override;
  static const std::vector<std::string>& layer_names();
  void set_trainable(bool trainable);
  const LossNetworkConfig& config() const { return config_; }

 private:
  LossNetworkConfig config_;
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<int> block_of_;  // block index (0-based) per conv
};
TORCH_MODULE(LossNetwork);

}  // namespace napa
