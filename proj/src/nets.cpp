#include "napa/nets.hpp"

#include "napa/error.hpp"
#include "napa/losses.hpp"

namespace napa {

namespace nn = torch::nn;

std::string to_string(Normalization n) { return n == Normalization::instance ? "instance" : "batch"; }

Normalization normalization_from_string(const std::string& s) {
  if (s == "instance") return Normalization::instance;
  if (s == "batch") return Normalization::batch;
  throw ConfigError("normalization must be 'instance' or 'batch', got '" + s + "'");
}

std::int64_t count_parameters(nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

namespace {

// A small epsilon keeps per-image normalisation invariant to rescaling of
// low-variance channels; 1e-5 already shifts outputs by ~1e-3 at variance 0.01.
constexpr double kInstanceEps = 1e-9;

nn::AnyModule make_norm(Normalization mode, int channels) {
  if (mode == Normalization::instance) {
    return nn::AnyModule(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true).eps(kInstanceEps)));
  }
  return nn::AnyModule(nn::BatchNorm2d(nn::BatchNorm2dOptions(channels)));
}

torch::Tensor pad_same(const torch::Tensor& x, int pad) {
  if (pad == 0) return x;
  const bool reflect = x.size(2) > pad && x.size(3) > pad;
  namespace F = torch::nn::functional;
  F::PadFuncOptions opts({pad, pad, pad, pad});
  if (reflect) opts.mode(torch::kReflect);
  return F::pad(x, opts);
}

void require_positive(int v, const char* what) {
  if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json TransformNetConfig::to_json() const {
  return {{"normalization", to_string(normalization)}, {"channels", channels}, {"residual_blocks", residual_blocks}};
}

TransformNetConfig TransformNetConfig::from_json(const nlohmann::json& j) {
  TransformNetConfig c;
  c.normalization = normalization_from_string(j.value("normalization", to_string(c.normalization)));
  c.channels = j.value("channels", c.channels);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  require_positive(c.channels, "transform net channels");
  if (c.residual_blocks < 0) throw ConfigError("transform net residual_blocks must be >= 0");
  return c;
}

std::int64_t transform_net_parameter_count(const TransformNetConfig& cfg) {
  const std::int64_t c = cfg.channels, r = cfg.residual_blocks;
  const std::int64_t convs = 81 * 3 * c + c + 9 * c * 2 * c + 2 * c + 9 * 2 * c * 4 * c + 4 * c +
                             r * 2 * (9 * 16 * c * c + 4 * c) + 9 * 4 * c * 2 * c + 2 * c +
                             9 * 2 * c * c + c + 81 * c * 3 + 3;
  const std::int64_t norms = 2 * (c + 2 * c + 4 * c + r * 2 * 4 * c + 2 * c + c);
  return convs + norms;
}

TransformNetImpl::Layer TransformNetImpl::make(const std::string& name, int in, int out, int kernel,
                                               int stride, bool upsample) {
  Layer l;
  l.conv = register_module(name, nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride)));
  l.norm = make_norm(config_.normalization, out);
  register_module(name + "_norm", l.norm.ptr());
  l.pad = kernel / 2;
  l.upsample = upsample;
  return l;
}

torch::Tensor TransformNetImpl::apply(Layer& l, torch::Tensor x, bool relu) {
  if (l.upsample) {
    x = nn::functional::interpolate(
        x, nn::functional::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
  }
  x = l.norm.forward(l.conv->forward(pad_same(x, l.pad)));
  return relu ? torch::relu(x) : x;
}

TransformNetImpl::TransformNetImpl(TransformNetConfig config) : config_(config) {
  require_positive(config_.channels, "transform net channels");
  const int c = config_.channels;
  down_.push_back(make("conv_in", 3, c, 9, 1, false));
  down_.push_back(make("down1", c, 2 * c, 3, 2, false));
  down_.push_back(make("down2", 2 * c, 4 * c, 3, 2, false));
  for (int i = 0; i < config_.residual_blocks; ++i) {
    const std::string n = "res" + std::to_string(i);
    Layer a = make(n + "_a", 4 * c, 4 * c, 3, 1, false);
    Layer b = make(n + "_b", 4 * c, 4 * c, 3, 1, false);
    res_.emplace_back(std::move(a), std::move(b));
  }
  up_.push_back(make("up1", 4 * c, 2 * c, 3, 1, true));
  up_.push_back(make("up2", 2 * c, c, 3, 1, true));
  out_ = register_module("conv_out", nn::Conv2d(nn::Conv2dOptions(c, 3, 9)));
  // Zero residual at initialisation: the net starts as the identity.
  torch::NoGradGuard guard;
  out_->weight.zero_();
  out_->bias.zero_();
}

torch::Tensor TransformNetImpl::forward(const torch::Tensor& input) {
  TORCH_CHECK(input.dim() == 4 && input.size(1) == 3, "transform net: expected [N, 3, H, W]");
  if (input.size(2) % 4 != 0 || input.size(3) % 4 != 0) {
    throw ConfigError("transform net: image size must be a multiple of 4");
  }
  torch::Tensor x = input;
  for (auto& l : down_) x = apply(l, x, true);
  for (auto& [a, b] : res_) x = x + apply(b, apply(a, x, true), false);
  for (auto& l : up_) x = apply(l, x, true);
  const auto residual = out_->forward(pad_same(x, 4));
  return torch::sigmoid(torch::logit(input, 1e-3) + residual);
}

torch::Tensor TransformNetImpl::first_conv(const torch::Tensor& x) {
  return down_.front().conv->forward(pad_same(x, down_.front().pad));
}

torch::Tensor TransformNetImpl::first_norm(const torch::Tensor& pre_norm) {
  return down_.front().norm.forward(pre_norm);
}

void copy_weights(nn::Module& from, nn::Module& to) {
  torch::NoGradGuard guard;
  auto src = from.named_parameters();
  for (auto& p : to.named_parameters()) p.value().copy_(src[p.key()]);
  auto bsrc = from.named_buffers();
  for (auto& b : to.named_buffers()) b.value().copy_(bsrc[b.key()]);
}

// ---------------------------------------------------------------------------

nlohmann::json PoseNetConfig::to_json() const {
  return {{"normalization", to_string(normalization)}, {"channels", channels}, {"downsample", downsample},
          {"residual_blocks", residual_blocks}, {"joints", joints}};
}

PoseNetConfig PoseNetConfig::from_json(const nlohmann::json& j) {
  PoseNetConfig c;
  c.normalization = normalization_from_string(j.value("normalization", to_string(c.normalization)));
  c.channels = j.value("channels", c.channels);
  c.downsample = j.value("downsample", c.downsample);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.joints = j.value("joints", c.joints);
  require_positive(c.channels, "pose net channels");
  require_positive(c.joints, "pose net joints");
  if (c.downsample < 0 || c.residual_blocks < 0) throw ConfigError("pose net: negative depth");
  return c;
}

std::int64_t pose_net_parameter_count(const PoseNetConfig& cfg) {
  const std::int64_t c = cfg.channels, r = cfg.residual_blocks, d = cfg.downsample, j = cfg.joints;
  return 27 * c + c + d * (9 * c * c + c) + r * 2 * (9 * c * c + c) + c * j + j + 2 * c * (1 + d + 2 * r);
}

namespace {

struct ResidualImpl : nn::Module {
  ResidualImpl(Normalization mode, int c)
      : a(register_module("a", nn::Conv2d(nn::Conv2dOptions(c, c, 3).padding(1)))),
        b(register_module("b", nn::Conv2d(nn::Conv2dOptions(c, c, 3).padding(1)))),
        na(make_norm(mode, c)),
        nb(make_norm(mode, c)) {
    register_module("na", na.ptr());
    register_module("nb", nb.ptr());
  }
  torch::Tensor forward(const torch::Tensor& x) {
    const auto h = torch::relu(na.forward(a->forward(x)));
    return torch::relu(x + nb.forward(b->forward(h)));
  }
  nn::Conv2d a, b;
  nn::AnyModule na, nb;
};
TORCH_MODULE(Residual);

void add_conv(nn::Sequential& seq, Normalization mode, int in, int out, int stride) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)));
  seq->push_back(make_norm(mode, out));
  seq->push_back(nn::Functional([](const torch::Tensor& x) { return torch::relu(x); }));
}

}  // namespace

PoseNetImpl::PoseNetImpl(PoseNetConfig config) : config_(config) {
  const int c = config_.channels;
  nn::Sequential body;
  add_conv(body, config_.normalization, 3, c, 1);
  for (int i = 0; i < config_.downsample; ++i) add_conv(body, config_.normalization, c, c, 2);
  for (int i = 0; i < config_.residual_blocks; ++i) body->push_back(Residual(config_.normalization, c));
  body_ = register_module("body", body);
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(c, config_.joints, 1)));
}

torch::Tensor PoseNetImpl::forward(const torch::Tensor& x) {
  const int s = config_.stride();
  if (x.size(2) % s != 0 || x.size(3) % s != 0) {
    throw ConfigError("pose net: input size must be divisible by the heatmap stride");
  }
  return head_->forward(body_->forward(x));
}

PoseOutput pose_forward(PoseNet& net, const torch::Tensor& images) {
  PoseOutput out;
  out.heatmaps = normalize_heatmaps(net->forward(images));
  const double s = net->config().stride();
  out.coords = (soft_argmax(out.heatmaps, false) + 0.5) * s - 0.5;
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json DepthNetConfig::to_json() const {
  return {{"normalization", to_string(normalization)}, {"channels", channels}, {"stages", stages}, {"bones", bones}};
}

DepthNetConfig DepthNetConfig::from_json(const nlohmann::json& j) {
  DepthNetConfig c;
  c.normalization = normalization_from_string(j.value("normalization", to_string(c.normalization)));
  c.channels = j.value("channels", c.channels);
  c.stages = j.value("stages", c.stages);
  c.bones = j.value("bones", c.bones);
  require_positive(c.channels, "depth net channels");
  require_positive(c.stages, "depth net stages");
  require_positive(c.bones, "depth net bones");
  return c;
}

std::int64_t depth_net_parameter_count(const DepthNetConfig& cfg) {
  std::int64_t n = 0;
  std::int64_t in = 3;
  for (int k = 0; k < cfg.stages; ++k) {
    const std::int64_t out = cfg.width(k);
    n += 9 * in * out + out + 2 * out;
    in = out;
  }
  const std::int64_t b3 = 3 * static_cast<std::int64_t>(cfg.bones);
  return n + 16 * in * b3 + b3;
}

DepthNetImpl::DepthNetImpl(DepthNetConfig config) : config_(config) {
  nn::Sequential enc;
  int in = 3;
  for (int k = 0; k < config_.stages; ++k) {
    add_conv(enc, config_.normalization, in, config_.width(k), 2);
    in = config_.width(k);
  }
  encoder_ = register_module("encoder", enc);
  fc_ = register_module("fc", nn::Linear(16 * in, 3 * config_.bones));
}

torch::Tensor DepthNetImpl::forward(const torch::Tensor& bonemaps) {
  auto x = torch::adaptive_avg_pool2d(encoder_->forward(bonemaps), {4, 4});
  return fc_->forward(x.flatten(1)).view({bonemaps.size(0), config_.bones, 3});
}

std::vector<Vec3> bones_from_tensor(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  TORCH_CHECK(c.dim() == 2 && c.size(1) == 3, "bones_from_tensor: expected [B, 3]");
  auto a = c.accessor<double, 2>();
  std::vector<Vec3> out;
  for (long k = 0; k < c.size(0); ++k) out.emplace_back(a[k][0], a[k][1], a[k][2]);
  return out;
}

torch::Tensor bones_to_tensor(const std::vector<Vec3>& bones, torch::Dtype dtype) {
  auto t = torch::empty({static_cast<long>(bones.size()), 3}, torch::kFloat64);
  auto a = t.accessor<double, 2>();
  for (std::size_t k = 0; k < bones.size(); ++k)
    for (int i = 0; i < 3; ++i) a[static_cast<long>(k)][i] = bones[k][i];
  return t.to(dtype);
}

Pose3D depth_forward(const std::vector<Vec3>& standardized, const Pose2D& pose2d, const std::vector<Vec3>& mean,
                     const std::vector<Vec3>& std, const KinematicChain& chain) {
  const auto vectors = destandardize_bones(standardized, mean, std);
  const Pose3D rebuilt = pose_from_bones(Vec3::Zero(), vectors, chain);
  Pose3D out(pose2d.size());
  for (std::size_t j = 0; j < pose2d.size(); ++j) {
    out.coords[j] = Vec3(pose2d.coords[j].x(), pose2d.coords[j].y(), rebuilt.coords[j].z());
  }
  out.coords[static_cast<std::size_t>(chain.root())].z() = 0.0;
  return out;
}

}  // namespace napa
