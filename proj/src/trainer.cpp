#include "napa/trainer.hpp"

#include "napa/error.hpp"
#include "napa/image_io.hpp"
#include "napa/metrics.hpp"
#include "napa/soft_render.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace napa {

using nlohmann::json;

// ---------------------------------------------------------------------------

json MixPolicy::to_json() const { return {{"real_fraction", real_fraction}, {"seed", seed}}; }

MixPolicy MixPolicy::from_json(const json& j) {
  MixPolicy m;
  m.real_fraction = j.value("real_fraction", m.real_fraction);
  m.seed = j.value("seed", m.seed);
  if (!(m.real_fraction >= 0.0 && m.real_fraction <= 1.0)) throw ConfigError("real_fraction must be in [0, 1]");
  return m;
}

BatchMixer::BatchMixer(MixPolicy policy) : policy_(policy), rng_(policy.seed) {
  if (!(policy_.real_fraction >= 0.0 && policy_.real_fraction <= 1.0)) {
    throw ConfigError("real_fraction must be in [0, 1]");
  }
}

std::vector<bool> BatchMixer::draw(std::size_t batch_size) {
  std::bernoulli_distribution coin(policy_.real_fraction);
  std::vector<bool> out(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out[i] = coin(rng_);
  return out;
}

MixedBatch mix_batch(const std::vector<torch::Tensor>& real_pool, const std::vector<torch::Tensor>& stylized_pool,
                     std::size_t batch_size, BatchMixer& mixer) {
  const double f = mixer.policy().real_fraction;
  if (f > 0.0 && real_pool.empty()) throw ConfigError("mix_batch: real pool is empty");
  if (f < 1.0 && stylized_pool.empty()) throw ConfigError("mix_batch: stylized pool is empty");
  MixedBatch b;
  b.real = mixer.draw(batch_size);
  std::vector<torch::Tensor> images;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto& pool = b.real[i] ? real_pool : stylized_pool;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    b.index.push_back(pick(mixer.rng()));
    images.push_back(pool[b.index.back()]);
  }
  if (!images.empty()) b.images = torch::stack(images);
  return b;
}

// ---------------------------------------------------------------------------

json OptimizerConfig::to_json() const {
  return {{"kind", kind == OptimizerKind::rmsprop ? "rmsprop" : "adam"},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"momentum", momentum},
          {"plateau_patience", plateau_patience},
          {"plateau_factor", plateau_factor},
          {"smoothing", smoothing},
          {"min_lr", min_lr}};
}

OptimizerConfig OptimizerConfig::from_json(const json& j) {
  OptimizerConfig c;
  const std::string kind = j.value("kind", "rmsprop");
  if (kind == "rmsprop") {
    c.kind = OptimizerKind::rmsprop;
  } else if (kind == "adam") {
    c.kind = OptimizerKind::adam;
    c = per_style_preset();
  } else {
    throw ConfigError("optimizer kind must be rmsprop or adam");
  }
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.momentum = j.value("momentum", c.momentum);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.smoothing = j.value("smoothing", c.smoothing);
  c.min_lr = j.value("min_lr", c.min_lr);
  if (!(c.lr > 0) || c.weight_decay < 0 || c.plateau_patience <= 0 || !(c.plateau_factor > 0 && c.plateau_factor <= 1) ||
      !(c.smoothing > 0 && c.smoothing <= 1)) {
    throw ConfigError("invalid optimizer settings");
  }
  return c;
}

OptimizerConfig OptimizerConfig::per_style_preset() {
  OptimizerConfig c;
  c.kind = OptimizerKind::adam;
  c.lr = 1e-3;
  c.weight_decay = 0.0;
  return c;
}

PlateauScheduler::PlateauScheduler(const OptimizerConfig& config) : config_(config) {}

double PlateauScheduler::step(double loss, double lr) {
  smoothed_ = smoothed_ ? (1.0 - config_.smoothing) * *smoothed_ + config_.smoothing * loss : loss;
  if (!best_ || *smoothed_ < *best_) {
    best_ = smoothed_;
    since_best_ = 0;
    return lr;
  }
  if (++since_best_ >= config_.plateau_patience) {
    best_ = smoothed_;
    since_best_ = 0;
    return std::max(config_.min_lr, lr * config_.plateau_factor);
  }
  return lr;
}

// ---------------------------------------------------------------------------

std::set<std::string> StageConfig::trainable() const {
  switch (stage) {
    case 1:
      if (freeze_loss_network) return {kStylizer};
      return {kStylizer, kLossNet};
    case 2: return {kPoseNet, kDepthNet};
    case 3: return {kStylizer, kPoseNet, kDepthNet};
    case 4: return {kStylizer, kPoseNet, kDepthNet, kReconstructor, kLossNet2};
    default: throw ConfigError("stage must be 1, 2, 3 or 4");
  }
}

std::set<std::string> StageConfig::frozen() const {
  const auto t = trainable();
  std::set<std::string> out;
  for (const auto& n : all_net_names())
    if (!t.count(n)) out.insert(n);
  return out;
}

json StageConfig::to_json() const {
  json j = {{"stage", stage},
            {"batch_size", batch_size},
            {"max_steps", max_steps},
            {"seed", seed},
            {"optimizer", optimizer.to_json()},
            {"weights", weights.to_json()},
            {"layers", layers.to_json()},
            {"mix", mix.to_json()},
            {"freeze_loss_network", freeze_loss_network},
            {"eval_every", eval_every},
            {"stop_at_pckh", stop_at_pckh},
            {"pckh_ratio", pckh_ratio},
            {"log_path", log_path}};
  if (depth_from_labels) j["depth_from_labels"] = *depth_from_labels;
  return j;
}

StageConfig StageConfig::from_json(const json& j) {
  StageConfig c = preset(j.value("stage", 1));
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  if (j.contains("optimizer")) c.optimizer = OptimizerConfig::from_json(j.at("optimizer"));
  if (j.contains("weights")) c.weights = LossWeights::from_json(j.at("weights"));
  if (j.contains("layers")) c.layers = LayerSettings::from_json(j.at("layers"));
  if (j.contains("mix")) c.mix = MixPolicy::from_json(j.at("mix"));
  c.freeze_loss_network = j.value("freeze_loss_network", c.freeze_loss_network);
  if (j.contains("depth_from_labels")) c.depth_from_labels = j.at("depth_from_labels").get<bool>();
  c.eval_every = j.value("eval_every", c.eval_every);
  c.stop_at_pckh = j.value("stop_at_pckh", c.stop_at_pckh);
  c.pckh_ratio = j.value("pckh_ratio", c.pckh_ratio);
  c.log_path = j.value("log_path", c.log_path);
  if (c.batch_size <= 0 || c.max_steps < 0) throw ConfigError("batch_size must be positive, max_steps >= 0");
  return c;
}

StageConfig StageConfig::preset(int stage) {
  StageConfig c;
  c.stage = stage;
  (void)c.trainable();  // validates the stage id
  c.batch_size = stage == 1 ? 2 : stage == 2 ? 3 : 22;
  return c;
}

// ---------------------------------------------------------------------------

double training_pckh(Pipeline& pipeline, const std::vector<Sample>& samples, double ratio) {
  PckhResult acc;
  const std::size_t chunk = 16;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<torch::Tensor> imgs;
    for (std::size_t i = start; i < end; ++i) imgs.push_back(samples[i].image);
    const auto coords = pipeline.predict_2d(torch::stack(imgs)).coords;
    for (std::size_t i = start; i < end; ++i) {
      const Pose2D pred = tensor_to_pose(coords[static_cast<long>(i - start)]);
      accumulate(acc, pckh(pred, samples[i].pose, samples[i].head_size, ratio));
    }
  }
  return acc.total.percent();
}

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimizerConfig& c, std::vector<torch::Tensor> params) {
  if (c.kind == OptimizerKind::adam) {
    return std::make_unique<torch::optim::Adam>(std::move(params),
                                                torch::optim::AdamOptions(c.lr).weight_decay(c.weight_decay));
  }
  return std::make_unique<torch::optim::RMSprop>(
      std::move(params), torch::optim::RMSpropOptions(c.lr).weight_decay(c.weight_decay).momentum(c.momentum));
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& g : opt.param_groups()) g.options().set_lr(lr);
}

// Sequential passes over shuffled epochs.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) { reshuffle(); }
  std::vector<long> next(std::size_t count) {
    std::vector<long> out;
    while (out.size() < count) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(static_cast<long>(order_[pos_++]));
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

torch::Tensor select_slots(const torch::Tensor& real, const torch::Tensor& stylized, const std::vector<bool>& flags) {
  std::vector<torch::Tensor> rows;
  for (std::size_t i = 0; i < flags.size(); ++i) rows.push_back(flags[i] ? real[static_cast<long>(i)] : stylized[static_cast<long>(i)]);
  return torch::stack(rows);
}

}  // namespace

StageResult run_stage(Pipeline& pipeline, const StageConfig& config, TrainingData& data) {
  const int stage = config.stage;
  const auto trainable = config.trainable();
  if (stage > 1 && pipeline.completed_stage < stage - 1) {
    throw PrerequisiteError("stage " + std::to_string(stage) + " needs a stage " + std::to_string(stage - 1) +
                            " checkpoint (have stage " + std::to_string(pipeline.completed_stage) + ")");
  }
  if (stage != 2 && data.styles.empty()) throw ConfigError("stage " + std::to_string(stage) + " needs style images");
  if (data.samples.empty()) throw ConfigError("no training samples");
  if (config.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (stage == 4 && !pipeline.has_self_supervision()) pipeline.init_self_supervision();

  const auto& chain = KinematicChain::standard();
  const auto& spec = pipeline.config().bonemap;
  const long n = static_cast<long>(data.samples.size());

  // Labelled tensors.
  std::vector<torch::Tensor> imgs, coords, vis;
  bool have_3d = true;
  std::vector<Pose3D> poses3d;
  for (const auto& s : data.samples) {
    imgs.push_back(s.image);
    coords.push_back(pose_to_tensor(s.pose));
    vis.push_back(visibility_to_tensor(s.pose));
    if (s.pose3d) {
      poses3d.push_back(*s.pose3d);
    } else {
      have_3d = false;
    }
  }
  const auto images = torch::stack(imgs);
  if (images.size(2) != pipeline.config().image_size || images.size(3) != pipeline.config().image_size) {
    throw ConfigError("training images do not match the pipeline image size");
  }
  const auto gt_coords = torch::stack(coords);
  const auto gt_visible = torch::stack(vis);
  torch::Tensor gt_bones, gt_maps, style_images;
  if (stage >= 2 && have_3d) {
    if (!pipeline.has_bone_statistics) pipeline.set_bone_statistics(poses3d);
    std::vector<torch::Tensor> b;
    for (const auto& p : poses3d) {
      BoneVectors bv = bone_vectors(p, chain);
      bv.mean = pipeline.bone_mean;
      bv.std = pipeline.bone_std;
      b.push_back(bones_to_tensor(standardize_bones(bv)));
    }
    gt_bones = torch::stack(b);
    if (config.depth_input_from_labels()) {
      std::vector<torch::Tensor> maps;
      for (const auto& s : data.samples) maps.push_back(to_tensor(render_hard(s.pose, chain, spec)));
      gt_maps = torch::stack(maps);
    }
  }
  if (!data.styles.empty()) {
    std::vector<torch::Tensor> st;
    for (std::size_t i = 0; i < data.styles.size(); ++i) st.push_back(data.styles.image(i));
    style_images = torch::stack(st);
  }

  // Membership: trainable nets learn, everything else is frozen and in eval
  // mode so that normalisation statistics stay put.
  StageResult result;
  std::vector<torch::Tensor> params;
  for (const auto& name : all_net_names()) {
    torch::nn::Module* m = pipeline.net(name);
    if (!m) continue;
    const bool train = trainable.count(name) > 0;
    m->train(train);
    for (auto& p : m->parameters()) p.set_requires_grad(train);
    if (train) {
      for (auto& p : m->parameters()) params.push_back(p);
    } else {
      result.hash_before[name] = module_hash(*m);
    }
  }

  torch::manual_seed(config.seed);
  std::mt19937_64 rng(config.seed);
  BatchMixer mixer(MixPolicy{config.mix.real_fraction, config.mix.seed ^ (config.seed * 0x9E3779B97F4A7C15ull)});
  IndexStream stream(static_cast<std::size_t>(n), rng);
  auto optimizer = make_optimizer(config.optimizer, params);
  PlateauScheduler scheduler(config.optimizer);
  double lr = config.optimizer.lr;

  torch::Tensor stylized_cache;
  if (stage == 2) {
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> parts;
    for (long start = 0; start < n; start += 8) {
      parts.push_back(pipeline.stylizer->forward(images.slice(0, start, std::min(n, start + 8))));
    }
    stylized_cache = torch::cat(parts);
  }

  std::ofstream log_file;
  if (!config.log_path.empty()) {
    log_file.open(config.log_path);
    if (!log_file) throw Error("cannot write log " + config.log_path);
  }

  for (int step = 0; step < config.max_steps; ++step) {
    const auto idx_vec = stream.next(static_cast<std::size_t>(config.batch_size));
    const auto idx = torch::tensor(idx_vec, torch::kLong);
    const auto content = images.index_select(0, idx);
    std::map<LossTerm, torch::Tensor> comps;
    torch::Tensor style, stylized;
    if (style_images.defined()) {
      std::uniform_int_distribution<long> pick(0, style_images.size(0) - 1);
      style = style_images[pick(rng)].unsqueeze(0);
    }

    if (stage != 2) {
      auto& fx = *pipeline.loss_net;
      stylized = pipeline.stylizer->forward(content);
      const auto& L = config.layers;
      comps[LossTerm::style] = style_loss(stylized, style, fx, L.style);
      comps[LossTerm::feat] = feat_loss(stylized, content, fx, L);
      comps[LossTerm::tv] = tv_loss(stylized);
      comps[LossTerm::sent] = js_entropy_loss(stylized, style, fx, L.sent);
      comps[LossTerm::srgb] = srgb_loss(stylized, style);
      comps[LossTerm::hsv] = hsv_loss(stylized, style);
      comps[LossTerm::cos] = cos_feature_loss(stylized, style, fx, L.cos);
      comps[LossTerm::content] = content_loss(stylized, content, fx, L);
      comps[LossTerm::cent] = js_entropy_loss(stylized, content, fx, L.cent);
    }

    if (stage >= 2) {
      const auto flags = mixer.draw(static_cast<std::size_t>(config.batch_size));
      const auto other = stage == 2 ? stylized_cache.index_select(0, idx) : stylized;
      const auto input = select_slots(content, other, flags);
      const auto pose = pose_forward(pipeline.pose_net, input);
      const auto vis_b = gt_visible.index_select(0, idx);
      comps[LossTerm::pose_2d] = integral_2d_loss(pose.coords, gt_coords.index_select(0, idx), vis_b);
      if (gt_bones.defined()) {
        const auto maps = config.depth_input_from_labels()
                              ? gt_maps.index_select(0, idx)
                              : render_soft(pose.coords, vis_b, chain, spec).image;
        comps[LossTerm::depth] = depth_loss(pipeline.depth_net->forward(maps), gt_bones.index_select(0, idx));
      }
      if (stage == 4) {
        auto& fx2 = *pipeline.loss_net2;
        const auto canvas = render_soft(pose.coords, vis_b, chain, spec, style.expand({config.batch_size, 3, -1, -1}));
        const auto rec = pipeline.reconstructor->forward(canvas.image);
        comps[LossTerm::style_sup] = style_sup_loss(rec, stylized, fx2, config.layers);
        comps[LossTerm::cos_sup] = cos_sup_loss(rec, stylized, fx2, config.layers);
        comps[LossTerm::feat_sup] = feat_sup_loss(rec, stylized, fx2, config.layers);
      }
    }

    const LossReport report = total_loss(comps, config.weights);
    optimizer->zero_grad();
    report.total.backward();
    optimizer->step();

    json line = {{"stage", stage}, {"step", step}, {"lr", lr}, {"total", report.total.item<double>()},
                 {"raw", report.raw}, {"weighted", report.weighted}};
    lr = scheduler.step(report.total.item<double>(), lr);
    set_lr(*optimizer, lr);
    result.steps_run = step + 1;

    bool stop = false;
    if (stage >= 2 && config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
      result.last_pckh = training_pckh(pipeline, data.samples, config.pckh_ratio);
      pipeline.pose_net->train();
      line["pckh"] = *result.last_pckh;
      stop = config.stop_at_pckh > 0 && *result.last_pckh >= config.stop_at_pckh;
    }
    if (log_file) log_file << line.dump() << '\n';
    result.log.push_back(std::move(line));
    if (stop) break;
  }
  result.final_lr = lr;

  for (auto& [name, before] : result.hash_before) {
    result.hash_after[name] = module_hash(*pipeline.net(name));
    if (result.hash_after[name] != before) throw Error("frozen net " + name + " changed during stage " + std::to_string(stage));
  }
  for (const auto& name : all_net_names()) {
    if (torch::nn::Module* m = pipeline.net(name)) {
      m->eval();
      for (auto& p : m->parameters()) p.set_requires_grad(true);
    }
  }
  pipeline.completed_stage = std::max(pipeline.completed_stage, stage);
  return result;
}

std::vector<PerStyleModel> train_per_style(const PipelineConfig& base, const StylePool& styles,
                                           const std::vector<Sample>& samples, StageConfig stage1, StageConfig stage2) {
  std::vector<PerStyleModel> out;
  for (std::size_t i = 0; i < styles.size(); ++i) {
    PipelineConfig cfg = base;
    cfg.seed = base.seed + 1000003ull * (i + 1);
    PerStyleModel m{styles.id(i), Pipeline(cfg), {}};
    TrainingData data{samples, StylePool({styles.image(i)}, {styles.id(i)}, cfg.seed)};
    stage1.stage = 1;
    stage1.seed = cfg.seed;
    stage2.stage = 2;
    stage2.seed = cfg.seed + 1;
    for (const StageConfig* sc : {&stage1, &stage2}) {
      auto r = run_stage(m.pipeline, *sc, data);
      for (auto& line : r.log) {
        line["style_id"] = styles.id(i);
        m.log.push_back(std::move(line));
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace napa
