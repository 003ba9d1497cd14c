#include "napa/feature_extractor.hpp"

#include "napa/error.hpp"

#include <algorithm>

namespace napa {

namespace {

constexpr int kConvsPerBlock[5] = {2, 2, 4, 4, 4};

}  // namespace

nlohmann::json LossNetworkConfig::to_json() const {
  return {{"widths", widths}, {"seed", seed}, {"weights", weights}};
}

LossNetworkConfig LossNetworkConfig::from_json(const nlohmann::json& j) {
  LossNetworkConfig c;
  c.widths = j.value("widths", c.widths);
  c.seed = j.value("seed", c.seed);
  c.weights = j.value("weights", c.weights);
  if (c.widths.size() != 5 || std::any_of(c.widths.begin(), c.widths.end(), [](int w) { return w <= 0; })) {
    throw ConfigError("loss network: widths must be 5 positive integers");
  }
  return c;
}

const std::vector<std::string>& LossNetworkImpl::layer_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int b = 0; b < 5; ++b)
      for (int i = 0; i < kConvsPerBlock[b]; ++i)
        n.push_back("relu" + std::to_string(b + 1) + "_" + std::to_string(i + 1));
    return n;
  }();
  return names;
}

LossNetworkImpl::LossNetworkImpl(LossNetworkConfig config) : config_(std::move(config)) {
  if (config_.widths.size() != 5) throw ConfigError("loss network: widths must have 5 entries");
  torch::manual_seed(config_.seed);
  int in = 3;
  std::size_t k = 0;
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < kConvsPerBlock[b]; ++i) {
      const int out = config_.widths[static_cast<std::size_t>(b)];
      auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      torch::nn::init::zeros_(conv->bias);
      convs_.push_back(register_module("conv" + std::to_string(k), conv));
      block_of_.push_back(b);
      in = out;
      ++k;
    }
  }
  if (!config_.weights.empty()) {
    torch::serialize::InputArchive archive;
    archive.load_from(config_.weights);
    load(archive);
  }
}

FeatureMap LossNetworkImpl::extract(const torch::Tensor& images, const std::vector<std::string>& layers) {
  const auto& names = layer_names();
  std::size_t last = 0;
  for (const auto& l : layers) {
    const auto it = std::find(names.begin(), names.end(), l);
    if (it == names.end()) throw ConfigError("loss network: unknown layer " + l);
    last = std::max(last, static_cast<std::size_t>(it - names.begin()));
  }
  FeatureMap out;
  if (layers.empty()) return out;
  // ImageNet statistics, the input convention of pretrained VGG weights.
  const auto opts = images.options();
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
  const auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
  auto x = (images - mean) / std;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k > 0 && block_of_[k] != block_of_[k - 1] && x.size(2) >= 2 && x.size(3) >= 2) {
      x = torch::max_pool2d(x, {2, 2}, {2, 2}, {0, 0}, {1, 1}, /*ceil_mode=*/true);
    }
    x = torch::relu(convs_[k]->forward(x));
    if (std::find(layers.begin(), layers.end(), names[k]) != layers.end()) out[names[k]] = x;
  }
  return out;
}

void LossNetworkImpl::set_trainable(bool trainable) {
  for (auto& p : parameters()) p.set_requires_grad(trainable);
}

}  // namespace napa
