#pragma once

#include "napa/data.hpp"
#include "napa/losses.hpp"
#include "napa/pipeline.hpp"

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace napa {

// ---------------------------------------------------------------------------
// Real:stylized mixing. Each slot is independently the original image with
// probability real_fraction.

struct MixPolicy {
  double real_fraction = 0.5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static MixPolicy from_json(const nlohmann::json& j);
};

class BatchMixer {
 public:
  explicit BatchMixer(MixPolicy policy);
  // true = real.
  std::vector<bool> draw(std::size_t batch_size);
  std::mt19937_64& rng() { return rng_; }
  const MixPolicy& policy() const { return policy_; }

 private:
  MixPolicy policy_;
  std::mt19937_64 rng_;
};

struct MixedBatch {
  torch::Tensor images;  // [B, 3, H, W]
  std::vector<bool> real;
  std::vector<std::size_t> index;  // into the chosen pool
};

// Picks each slot's pool by a Bernoulli draw and its image uniformly within
// that pool. Throws ConfigError when a pool that can be drawn is empty.
MixedBatch mix_batch(const std::vector<torch::Tensor>& real_pool,
                     const std::vector<torch::Tensor>& stylized_pool, std::size_t batch_size,
                     BatchMixer& mixer);

// ---------------------------------------------------------------------------

enum class OptimizerKind { rmsprop, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double momentum = 0.9;
  // Plateau rule: when the smoothed loss has not improved for `patience`
  // steps, lr *= factor.
  int plateau_patience = 200;
  double plateau_factor = 0.5;
  double smoothing = 0.05;  // EMA weight of the newest loss
  double min_lr = 1e-8;

  nlohmann::json to_json() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
  // Adam, lr 1e-3, for per-style baselines.
  static OptimizerConfig per_style_preset();
};

class PlateauScheduler {
 public:
  explicit PlateauScheduler(const OptimizerConfig& config);
  // Feeds one loss value; returns the learning rate to use next.
  double step(double loss, double lr);

 private:
  OptimizerConfig config_;
  std::optional<double> smoothed_;
  std::optional<double> best_;
  int since_best_ = 0;
};

struct StageConfig {
  int stage = 1;
  int batch_size = 2;
  int max_steps = 100;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  LossWeights weights;
  LayerSettings layers;
  MixPolicy mix;  // stages 2 to 4
  // Stage 1 trains the loss network alongside F unless this is set.
  bool freeze_loss_network = false;
  // Depth net input: hard bone maps of the labelled 2D pose (true) or soft
  // bone maps of the predicted pose (false, lets L_depth reach G).
  std::optional<bool> depth_from_labels;  // default: true in stage 2, false later
  // Optional early stop on training-set PCKh, checked every eval_every steps.
  int eval_every = 0;
  double stop_at_pckh = -1.0;
  double pckh_ratio = 0.25;
  std::string log_path;

  std::set<std::string> trainable() const;
  std::set<std::string> frozen() const;
  bool depth_input_from_labels() const { return depth_from_labels.value_or(stage == 2); }

  nlohmann::json to_json() const;
  static StageConfig from_json(const nlohmann::json& j);
  // Batch sizes 2 / 3 / 22 / 22 by stage.
  static StageConfig preset(int stage);
};

struct TrainingData {
  std::vector<Sample> samples;
  StylePool styles;
};

struct StageResult {
  std::vector<nlohmann::json> log;
  std::map<std::string, std::uint64_t> hash_before;
  std::map<std::string, std::uint64_t> hash_after;
  int steps_run = 0;
  double final_lr = 0.0;
  std::optional<double> last_pckh;
};

// Trains one stage in place. Stage k > 1 needs pipeline.completed_stage >=
// k - 1 (PrerequisiteError otherwise). Frozen nets are hashed before and
// after; a change throws Error. Each step appends a JSON line with the
// weighted and raw value of every active term.
StageResult run_stage(Pipeline& pipeline, const StageConfig& config, TrainingData& data);

// Training-set PCKh total (percent) with the pose net on the original images.
double training_pckh(Pipeline& pipeline, const std::vector<Sample>& samples, double ratio);

struct PerStyleModel {
  std::string style_id;
  Pipeline pipeline;
  std::vector<nlohmann::json> log;
};

// One independent (F, G) pair per style: fresh nets seeded per style, stage 1
// on that style alone, then stage 2.
std::vector<PerStyleModel> train_per_style(const PipelineConfig& base, const StylePool& styles,
                                           const std::vector<Sample>& samples, StageConfig stage1,
                                           StageConfig stage2);

}  // namespace napa
