#include "acceptance.hpp"

#include "napa/bonemap.hpp"
#include "napa/feature_extractor.hpp"
#include "napa/losses.hpp"
#include "napa/nets.hpp"
#include "napa/soft_render.hpp"
#include "napa/synth.hpp"

#include "ml_support.hpp"

#include <torch/torch.h>

#include <cmath>
#include <functional>
#include <random>

namespace napa::acceptance {

namespace {

BoneMapSpec canvas(int size, double width) {
  BoneMapSpec s;
  s.height = s.width = size;
  s.bone_width = width;
  return s;
}

Pose2D random_figure(std::mt19937_64& rng, const BoneMapSpec& spec) {
  return sample_pose(rng, spec, 0.8, AngleLimitTable::defaults(KinematicChain::standard())).projection();
}

// Pixels whose 8-neighbourhood in the hard mask holds the other value.
bool in_band(const std::vector<bool>& mask, int n, int y, int x) {
  const bool v = mask[static_cast<std::size_t>(y * n + x)];
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int yy = y + dy, xx = x + dx;
      if (yy >= 0 && xx >= 0 && yy < n && xx < n && mask[static_cast<std::size_t>(yy * n + xx)] != v) return true;
    }
  return false;
}

torch::Tensor rand_images(long n, long size, std::uint64_t seed) {
  torch::manual_seed(seed);
  return 0.1 + 0.8 * torch::rand({n, 3, size, size}, torch::kFloat64);
}

torch::Tensor solid(double r, double g, double b) {
  return torch::tensor({r, g, b}, torch::kFloat64).view({1, 3, 1, 1}).expand({1, 3, 4, 4}).clone();
}

// See the FD fixture note in the unit tests: at 8x8 the deepest blocks run at
// 1x1, so each conv is rescaled to unit output RMS on a probe batch.
LossNetwork fd_loss_net() {
  LossNetworkConfig c;
  c.widths = {4, 6, 8, 8, 8};
  LossNetwork net(c);
  net->to(torch::kFloat64);
  torch::NoGradGuard guard;
  const auto probe = rand_images(4, 8, 20);
  const auto& names = LossNetworkImpl::layer_names();
  auto params = net->named_parameters();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double rms = net->extract(probe, {names[k]}).at(names[k]).square().mean().sqrt().item<double>();
    params["conv" + std::to_string(k) + ".weight"].div_(rms);
    params["conv" + std::to_string(k) + ".bias"].div_(rms);
  }
  return net;
}

}  // namespace

void soft_renderer(Report& r) {
  const auto& chain = KinematicChain::standard();
  const auto spec = canvas(64, 6.0);
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto x0 = pose_to_tensor(random_figure(rng, spec), torch::kFloat64);
    auto x = x0.clone().set_requires_grad(true);
    const auto g = torch::autograd::grad({render_soft(x, {}, chain, spec).image.mean()}, {x})[0];
    torch::NoGradGuard guard;
    const double h = 1e-3;
    auto fd = torch::zeros_like(x0);
    auto acc = fd.accessor<double, 2>();
    for (long j = 0; j < x0.size(0); ++j)
      for (long k = 0; k < 2; ++k) {
        auto plus = x0.clone(), minus = x0.clone();
        plus[j][k] += h;
        minus[j][k] -= h;
        acc[j][k] = (render_soft(plus, {}, chain, spec).image.mean().item<double>() -
                     render_soft(minus, {}, chain, spec).image.mean().item<double>()) /
                    (2 * h);
      }
    worst = std::max(worst, (g - fd).norm().item<double>() / fd.norm().item<double>());
  }
  r.note("max_fd_rel_error", worst);
  r.check(worst < 1e-3, "keypoint gradients match central differences on 10 poses");

  auto sharp = spec;
  sharp.soft_sharpness = 1e3;
  int mismatches = 0, off_band = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const Pose2D pose = random_figure(rng, sharp);
    const BoneMap hard = render_hard(pose, chain, sharp);
    std::vector<bool> mask(64 * 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) mask[static_cast<std::size_t>(y * 64 + x)] = hard.at(y, x) != sharp.background;
    const auto cov = render_soft(pose_to_tensor(pose, torch::kFloat64), {}, chain, sharp).coverage[0];
    auto c = cov.accessor<double, 2>();
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if ((c[y][x] > 0.5) != mask[static_cast<std::size_t>(y * 64 + x)]) {
          ++mismatches;
          off_band += !in_band(mask, 64, y, x);
        }
  }
  r.note("sharp_mismatches", mismatches);
  r.check(off_band == 0, "sharp-limit mask differs from the hard mask only within 1 px of its boundary");
}

void loss_suite(Report& r) {
  LossNetworkConfig lc;
  lc.widths = {4, 6, 8, 8, 8};
  LossNetwork fx(lc);
  fx->to(torch::kFloat64);
  const LayerSettings L;
  const auto a = rand_images(1, 8, 9);
  const auto coords = torch::rand({1, 18, 2}, torch::kFloat64) * 8;
  const auto bones = torch::randn({1, 17, 3}, torch::kFloat64);
  const std::map<LossTerm, torch::Tensor> zero{
      {LossTerm::style, style_loss(a, a, *fx, L.style)},
      {LossTerm::feat, feat_loss(a, a, *fx, L)},
      {LossTerm::tv, tv_loss(torch::full({1, 3, 8, 8}, 0.4, torch::kFloat64))},
      {LossTerm::sent, js_entropy_loss(a, a, *fx, L.sent)},
      {LossTerm::srgb, srgb_loss(a, a)},
      {LossTerm::hsv, hsv_loss(a, a)},
      {LossTerm::cos, cos_feature_loss(a, a, *fx, L.cos)},
      {LossTerm::content, content_loss(a, a, *fx, L)},
      {LossTerm::cent, js_entropy_loss(a, a, *fx, L.cent)},
      {LossTerm::pose_2d, integral_2d_loss(coords, coords)},
      {LossTerm::depth, depth_loss(bones, bones)},
      {LossTerm::style_sup, style_sup_loss(a, a, *fx, L)},
      {LossTerm::cos_sup, cos_sup_loss(a, a, *fx, L)},
      {LossTerm::feat_sup, feat_sup_loss(a, a, *fx, L)}};
  r.check(zero.size() == kNumLossTerms, "fourteen terms");
  for (const auto& [t, v] : zero)
    r.check(std::abs(v.item<double>()) < 1e-12, std::string(loss_name(t)) + " is 0 on identical inputs");

  torch::manual_seed(1);
  bool bounded = true;
  for (int i = 0; i < 50; ++i) {
    const double js = js_divergence_logits(10 * torch::randn({64}, torch::kFloat64), 10 * torch::randn({64}, torch::kFloat64)).item<double>();
    bounded = bounded && js >= 0.0 && js <= std::log(2.0) + 1e-12;
  }
  const double disjoint = js_divergence(torch::tensor({1.0, 0.0}, torch::kFloat64), torch::tensor({0.0, 1.0}, torch::kFloat64)).item<double>();
  r.check(bounded && std::abs(disjoint - std::log(2.0)) < 1e-12, "JS within [0, ln 2], disjoint at ln 2");

  const double tv = tv_loss(torch::tensor({0.0, 1.0, 0.0, 1.0}, torch::kFloat64).view({1, 1, 2, 2})).item<double>();
  const double js = js_divergence(torch::tensor({1.0, 0.0}, torch::kFloat64), torch::tensor({0.5, 0.5}, torch::kFloat64)).item<double>();
  const double js_hand = 0.5 * std::log(1.0 / 0.75) + 0.25 * (std::log(0.5 / 0.75) + std::log(0.5 / 0.25));
  const double hsv = hsv_loss(solid(1, 0, 0), solid(0, 1, 0)).item<double>();
  r.note("tv", tv);
  r.note("js", js);
  r.note("hsv", hsv);
  r.check(std::abs(tv - 2.0) < 1e-6, "tv = 2.0 case");
  r.check(std::abs(js - js_hand) < 1e-6 && std::abs(js - 0.2158) < 1e-4, "JS ~ 0.2158 case");
  r.check(std::abs(hsv - 1.0 / 3.0) < 1e-6, "hsv = 1/3 case");

  auto fdx = fd_loss_net();
  const auto target = rand_images(1, 8, 21);
  const std::vector<std::pair<const char*, std::function<torch::Tensor(const torch::Tensor&)>>> cases{
      {"style", [&](const torch::Tensor& x) { return style_loss(x, target, *fdx, L.style); }},
      {"feat", [&](const torch::Tensor& x) { return feat_loss(x, target, *fdx, L); }},
      {"tv", [&](const torch::Tensor& x) { return tv_loss(x); }},
      {"sent", [&](const torch::Tensor& x) { return js_entropy_loss(x, target, *fdx, L.sent); }},
      {"srgb", [&](const torch::Tensor& x) { return srgb_loss(x, target); }},
      {"hsv", [&](const torch::Tensor& x) { return hsv_loss(x, target); }},
      {"cos", [&](const torch::Tensor& x) { return cos_feature_loss(x, target, *fdx, L.cos); }},
      {"content", [&](const torch::Tensor& x) { return content_loss(x, target, *fdx, L); }},
      {"cent", [&](const torch::Tensor& x) { return js_entropy_loss(x, target, *fdx, L.cent); }},
      {"style_sup", [&](const torch::Tensor& x) { return style_sup_loss(x, target, *fdx, L); }},
      {"cos_sup", [&](const torch::Tensor& x) { return cos_sup_loss(x, target, *fdx, L); }},
      {"feat_sup", [&](const torch::Tensor& x) { return feat_sup_loss(x, target, *fdx, L); }},
  };
  double worst = 0.0;
  for (const auto& [name, f] : cases) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const double e = testing::directional_fd_error(f, rand_images(1, 8, 100 + seed), seed);
      worst = std::max(worst, e);
      r.check(e < 1e-3, std::string(name) + " finite differences (seed " + std::to_string(seed) + ")");
    }
  }
  const auto gt = torch::rand({2, 18, 2}, torch::kFloat64) * 8;
  const double e_int = testing::directional_fd_error([&](const torch::Tensor& x) { return integral_2d_loss(x, gt); },
                                                     gt + 0.3 + torch::rand_like(gt), 1);
  const auto gb = torch::randn({2, 17, 3}, torch::kFloat64);
  const double e_depth = testing::directional_fd_error([&](const torch::Tensor& x) { return depth_loss(x, gb); },
                                                       torch::randn_like(gb), 2);
  worst = std::max({worst, e_int, e_depth});
  r.check(e_int < 1e-3, "pose_2d finite differences");
  r.check(e_depth < 1e-3, "depth finite differences");
  r.note("max_fd_rel_error", worst);

  const double w = total_loss({{LossTerm::hsv, torch::ones({}, torch::kFloat64)}}, LossWeights{}).total.item<double>();
  r.check(w == 300.0, "hsv-only unit component weighs 300");
}

void instance_norm(Report& r) {
  torch::manual_seed(1);
  const auto x = torch::rand({4, 3, 16, 16}, torch::kFloat64);
  TransformNet inst(TransformNetConfig{Normalization::instance, 8, 1});
  inst->to(torch::kFloat64);
  const auto pre = inst->first_conv(x);
  const auto a = 0.5 + torch::rand({4, pre.size(1), 1, 1}, torch::kFloat64) * 3;
  const auto b = torch::randn({4, pre.size(1), 1, 1}, torch::kFloat64);
  const double diff = (inst->first_norm(pre) - inst->first_norm(a * pre + b)).abs().max().item<double>();

  // Batch mode with a heterogeneous batch: one image rescaled changes every
  // image's statistics.
  TransformNet batch(TransformNetConfig{Normalization::batch, 8, 1});
  batch->to(torch::kFloat64);
  batch->train();
  const auto bpre = batch->first_conv(x);
  auto scale = torch::ones({4, bpre.size(1), 1, 1}, torch::kFloat64);
  scale[0] = 3.0;
  const double bdiff = (batch->first_norm(bpre) - batch->first_norm(scale * bpre)).abs().max().item<double>();
  r.note("instance_diff", diff);
  r.note("batch_diff", bdiff);
  r.check(diff < 1e-5, "instance norm invariant to per-channel positive affine pre-scaling (1e-5)");
  r.check(bdiff > 1e-2, "batch norm breaks the same property");
}

}  // namespace napa::acceptance
