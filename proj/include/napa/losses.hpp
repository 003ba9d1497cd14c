#pragma once

#include "napa/feature_extractor.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

namespace napa {

// Images are [N, 3, H, W] in [0, 1]; every image loss is averaged over N.
// A second argument with N = 1 broadcasts against the first (a shared style
// image).

enum class LossTerm {
  style, feat, tv, sent, srgb, hsv, cos, content, cent, pose_2d, depth, style_sup, cos_sup, feat_sup
};
inline constexpr std::size_t kNumLossTerms = 14;
const std::array<LossTerm, kNumLossTerms>& all_loss_terms();
const char* loss_name(LossTerm t);
LossTerm loss_term_from_name(const std::string& name);

struct LossWeights {
  std::array<double, kNumLossTerms> w{1.0, 1.0, 1.0, 1e9, 200.0, 300.0, 1000.0,
                                      1.0, 1e6, 1.0, 1000.0, 0.0035, 0.0035, 0.0035};

  double operator[](LossTerm t) const { return w[static_cast<std::size_t>(t)]; }
  double& operator[](LossTerm t) { return w[static_cast<std::size_t>(t)]; }

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys or negative weights throw
  // ConfigError.
  static LossWeights from_json(const nlohmann::json& j);
};

struct LayerSettings {
  std::vector<std::string> style{"relu1_2", "relu2_1", "relu3_2", "relu4_2"};
  std::string feat = "relu2_2";
  std::string content = "relu4_2";
  std::string cos = "relu4_2";
  std::vector<std::string> sent{"relu1_1", "relu1_2", "relu2_1"};
  std::vector<std::string> cent{"relu5_2", "relu5_3", "relu5_4"};

  nlohmann::json to_json() const;
  static LayerSettings from_json(const nlohmann::json& j);
};

// [N, C, H, W] -> [N, C, C], F F^T / (C H W).
torch::Tensor gram(const torch::Tensor& features);

torch::Tensor style_loss(const torch::Tensor& o, const torch::Tensor& s, FeatureExtractor& fx,
                         const std::vector<std::string>& layers);
// Mean squared feature difference at one layer.
torch::Tensor feature_mse(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                          const std::string& layer);
torch::Tensor content_loss(const torch::Tensor& o, const torch::Tensor& i, FeatureExtractor& fx,
                           const LayerSettings& layers = {});
torch::Tensor feat_loss(const torch::Tensor& o, const torch::Tensor& i, FeatureExtractor& fx,
                        const LayerSettings& layers = {});
// Sum of squared horizontal and vertical neighbour differences per image.
torch::Tensor tv_loss(const torch::Tensor& o);

// JS divergence (natural log) between probability vectors along the last dim.
torch::Tensor js_divergence(const torch::Tensor& p, const torch::Tensor& q);
// Same, from unnormalised logits via a log-space softmax.
torch::Tensor js_divergence_logits(const torch::Tensor& a, const torch::Tensor& b);
// Mean over layers of JS between softmax-normalised flattened features.
torch::Tensor js_entropy_loss(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                              const std::vector<std::string>& layers);

// Standard sRGB transfer curve applied to linear values in [0, 1].
torch::Tensor srgb_encode(const torch::Tensor& linear);
// Per-sample cosine similarity of flattened tensors; 0 when either norm is 0.
torch::Tensor flat_cosine_similarity(const torch::Tensor& a, const torch::Tensor& b);
// 1 - flat_cosine_similarity, averaged over the batch.
torch::Tensor cosine_distance(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor srgb_loss(const torch::Tensor& o, const torch::Tensor& s);

// [N, 3, H, W] RGB -> [N, 3, H, W] HSV with h, s, v in [0, 1].
torch::Tensor rgb_to_hsv(const torch::Tensor& rgb);
// Sum over h, s, v of the mean absolute difference; hue distance is circular.
torch::Tensor hsv_loss(const torch::Tensor& o, const torch::Tensor& s);
torch::Tensor cos_feature_loss(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                               const std::string& layer = "relu4_2");

// Self-supervision on the reconstruction O' against the stylization O.
torch::Tensor style_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                             const LayerSettings& layers = {});
torch::Tensor cos_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                           const LayerSettings& layers = {});
torch::Tensor feat_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                            const LayerSettings& layers = {});

// Expected (x, y) per joint in heatmap cells, x along columns.
// heatmaps [N, J, Hh, Wh]. Without `normalize` the slices must already sum to
// one; an all-zero slice throws ConfigError.
torch::Tensor soft_argmax(const torch::Tensor& heatmaps, bool normalize);
// Spatial softmax per joint slice.
torch::Tensor normalize_heatmaps(const torch::Tensor& logits);

// Mean absolute coordinate error over visible joints. pred, gt [N, J, 2];
// visible [N, J] bool (undefined = all). Throws ConfigError when no joint is
// visible.
torch::Tensor integral_2d_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                               const torch::Tensor& visible = {});
// Mean squared difference of standardised bone vectors [N, 17, 3].
torch::Tensor depth_loss(const torch::Tensor& pred_std, const torch::Tensor& gt_std);

struct LossReport {
  torch::Tensor total;
  std::map<std::string, double> raw;
  std::map<std::string, double> weighted;

  nlohmann::json to_json() const;
};

// Weighted sum over the supplied components; absent terms contribute nothing.
LossReport total_loss(const std::map<LossTerm, torch::Tensor>& components, const LossWeights& weights);

}  // namespace napa
