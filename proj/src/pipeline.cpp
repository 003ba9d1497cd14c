#include "napa/pipeline.hpp"

#include "napa/error.hpp"
#include "napa/image_io.hpp"
#include "napa/soft_render.hpp"

#include <cstring>
#include <fstream>

namespace napa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json vec3_list(const std::vector<Vec3>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back({x.x(), x.y(), x.z()});
  return out;
}

std::vector<Vec3> vec3_list(const json& j) {
  std::vector<Vec3> out;
  for (const auto& x : j) out.emplace_back(x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>());
  return out;
}

template <typename Holder>
void save_net(const Holder& h, const fs::path& file) {
  torch::serialize::OutputArchive archive;
  h->save(archive);
  archive.save_to(file.string());
}

template <typename Holder>
void load_net(Holder& h, const fs::path& file) {
  if (!fs::exists(file)) throw Error("checkpoint is missing " + file.filename().string());
  torch::serialize::InputArchive archive;
  archive.load_from(file.string());
  h->load(archive);
}

}  // namespace

json PipelineConfig::to_json() const {
  return {{"image_size", image_size},     {"transform", transform.to_json()}, {"pose", pose.to_json()},
          {"depth", depth.to_json()},     {"loss_net", loss_net.to_json()},   {"bonemap", bonemap.to_json()},
          {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  c.image_size = j.value("image_size", c.image_size);
  if (c.image_size <= 0 || c.image_size % 4 != 0) throw ConfigError("image_size must be a positive multiple of 4");
  c.transform = TransformNetConfig::from_json(j.value("transform", json::object()));
  c.pose = PoseNetConfig::from_json(j.value("pose", json::object()));
  c.depth = DepthNetConfig::from_json(j.value("depth", json::object()));
  c.loss_net = LossNetworkConfig::from_json(j.value("loss_net", json::object()));
  if (j.contains("bonemap")) {
    c.bonemap = BoneMapSpec::from_json(j.at("bonemap"));
  } else {
    // Same relative width as 9 px at 224.
    c.bonemap.bone_width = 9.0 * c.image_size / 224.0;
  }
  c.bonemap.height = c.bonemap.width = c.image_size;
  c.bonemap.validate(kNumBones);
  c.seed = j.value("seed", c.seed);
  return c;
}

const std::vector<std::string>& all_net_names() {
  static const std::vector<std::string> names{kStylizer, kLossNet, kPoseNet, kDepthNet, kReconstructor, kLossNet2};
  return names;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.bonemap.height = config_.bonemap.width = config_.image_size;
  if (config_.image_size % config_.pose.stride() != 0) {
    throw ConfigError("image_size must be divisible by the pose heatmap stride");
  }
  torch::manual_seed(config_.seed);
  stylizer = TransformNet(config_.transform);
  torch::manual_seed(config_.seed + 1);
  pose_net = PoseNet(config_.pose);
  torch::manual_seed(config_.seed + 2);
  depth_net = DepthNet(config_.depth);
  loss_net = LossNetwork(config_.loss_net);
  bone_mean.assign(kNumBones, Vec3::Zero());
  bone_std.assign(kNumBones, Vec3::Ones());
}

void Pipeline::init_self_supervision() {
  reconstructor = TransformNet(config_.transform);
  copy_weights(*stylizer, *reconstructor);
  auto cfg = config_.loss_net;
  cfg.weights.clear();
  loss_net2 = LossNetwork(cfg);
  copy_weights(*loss_net, *loss_net2);
}

torch::nn::Module* Pipeline::net(const std::string& name) {
  if (name == kStylizer) return stylizer.ptr().get();
  if (name == kPoseNet) return pose_net.ptr().get();
  if (name == kDepthNet) return depth_net.ptr().get();
  if (name == kLossNet) return loss_net.ptr().get();
  if (name == kReconstructor) return reconstructor.is_empty() ? nullptr : reconstructor.ptr().get();
  if (name == kLossNet2) return loss_net2.is_empty() ? nullptr : loss_net2.ptr().get();
  throw ConfigError("unknown net " + name);
}

void Pipeline::set_bone_statistics(const std::vector<Pose3D>& poses) {
  fit_bone_statistics(poses, KinematicChain::standard(), bone_mean, bone_std);
  has_bone_statistics = true;
}

void Pipeline::check_size(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != config_.image_size ||
      images.size(3) != config_.image_size) {
    throw ConfigError("expected images of shape [N, 3, " + std::to_string(config_.image_size) + ", " +
                      std::to_string(config_.image_size) + "]");
  }
}

torch::Tensor Pipeline::stylize(const torch::Tensor& images) {
  check_size(images);
  torch::NoGradGuard guard;
  stylizer->eval();
  return stylizer->forward(images);
}

PoseOutput Pipeline::predict_2d(const torch::Tensor& images) {
  check_size(images);
  torch::NoGradGuard guard;
  pose_net->eval();
  return pose_forward(pose_net, images);
}

std::vector<Pose3D> Pipeline::lift(const std::vector<Pose2D>& poses) {
  if (poses.empty()) return {};
  const auto& chain = KinematicChain::standard();
  std::vector<torch::Tensor> maps;
  for (const auto& p : poses) maps.push_back(to_tensor(render_hard(p, chain, config_.bonemap)));
  torch::NoGradGuard guard;
  depth_net->eval();
  const auto out = depth_net->forward(torch::stack(maps));
  std::vector<Pose3D> result;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    result.push_back(depth_forward(bones_from_tensor(out[static_cast<long>(i)]), poses[i], bone_mean, bone_std, chain));
  }
  return result;
}

torch::Tensor Pipeline::reconstruct(const torch::Tensor& coords, const torch::Tensor& visible,
                                    const torch::Tensor& style) {
  if (!has_self_supervision()) throw Error("reconstruct: the pipeline has no reconstruction net yet");
  const auto composite = render_soft(coords, visible, KinematicChain::standard(), config_.bonemap, style).image;
  return reconstructor->forward(composite);
}

void Pipeline::save(const fs::path& dir, const json& extra) const {
  fs::create_directories(dir);
  json nets = json::array();
  save_net(stylizer, dir / (std::string(kStylizer) + ".pt"));
  save_net(pose_net, dir / (std::string(kPoseNet) + ".pt"));
  save_net(depth_net, dir / (std::string(kDepthNet) + ".pt"));
  save_net(loss_net, dir / (std::string(kLossNet) + ".pt"));
  nets = {kStylizer, kPoseNet, kDepthNet, kLossNet};
  if (has_self_supervision()) {
    save_net(reconstructor, dir / (std::string(kReconstructor) + ".pt"));
    save_net(loss_net2, dir / (std::string(kLossNet2) + ".pt"));
    nets.push_back(kReconstructor);
    nets.push_back(kLossNet2);
  }
  json meta = {{"format", "napa-checkpoint"},
               {"version", kFormatVersion},
               {"completed_stage", completed_stage},
               {"config", config_.to_json()},
               {"nets", nets},
               {"bone_statistics", has_bone_statistics},
               {"bone_mean", vec3_list(bone_mean)},
               {"bone_std", vec3_list(bone_std)}};
  if (!extra.is_null()) meta["extra"] = extra;
  std::ofstream(dir / "metadata.json") << meta.dump(2) << '\n';
}

Pipeline Pipeline::load(const fs::path& dir) {
  std::ifstream in(dir / "metadata.json");
  if (!in) throw Error("not a checkpoint directory: " + dir.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("unreadable checkpoint metadata: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "napa-checkpoint" || meta.value("version", 0) != kFormatVersion) {
    throw Error("incompatible checkpoint format in " + dir.string());
  }
  PipelineConfig cfg = PipelineConfig::from_json(meta.at("config"));
  cfg.loss_net.weights.clear();
  Pipeline p(cfg);
  load_net(p.stylizer, dir / (std::string(kStylizer) + ".pt"));
  load_net(p.pose_net, dir / (std::string(kPoseNet) + ".pt"));
  load_net(p.depth_net, dir / (std::string(kDepthNet) + ".pt"));
  load_net(p.loss_net, dir / (std::string(kLossNet) + ".pt"));
  const auto nets = meta.value("nets", json::array());
  if (std::find(nets.begin(), nets.end(), kReconstructor) != nets.end()) {
    p.init_self_supervision();
    load_net(p.reconstructor, dir / (std::string(kReconstructor) + ".pt"));
    load_net(p.loss_net2, dir / (std::string(kLossNet2) + ".pt"));
  }
  p.completed_stage = meta.value("completed_stage", 0);
  p.has_bone_statistics = meta.value("bone_statistics", false);
  p.bone_mean = vec3_list(meta.at("bone_mean"));
  p.bone_std = vec3_list(meta.at("bone_std"));
  if (p.bone_mean.size() != kNumBones || p.bone_std.size() != kNumBones) {
    throw Error("checkpoint bone statistics have the wrong size");
  }
  return p;
}

std::uint64_t module_hash(torch::nn::Module& module) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  auto add = [&](const std::string& name, const torch::Tensor& t) {
    mix(name.data(), name.size());
    const auto c = t.detach().to(torch::kCPU).contiguous();
    mix(c.data_ptr(), static_cast<std::size_t>(c.numel()) * c.element_size());
  };
  for (const auto& p : module.named_parameters()) add(p.key(), p.value());
  for (const auto& b : module.named_buffers()) add(b.key(), b.value());
  return h;
}

}  // namespace napa
