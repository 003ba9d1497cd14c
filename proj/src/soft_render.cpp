#include "napa/soft_render.hpp"

#include "napa/error.hpp"

namespace napa {

namespace {

torch::Tensor color_tensor(const Rgb8& c, const torch::TensorOptions& opts) {
  return torch::tensor({c[0] / 255.0, c[1] / 255.0, c[2] / 255.0}, opts);
}

}  // namespace

torch::Tensor palette_tensor(const BoneMapSpec& spec, torch::Dtype dtype) {
  auto out = torch::empty({static_cast<long>(spec.palette.size()), 3}, torch::kFloat64);
  for (std::size_t k = 0; k < spec.palette.size(); ++k) {
    for (int c = 0; c < 3; ++c) out[static_cast<long>(k)][c] = spec.palette[k][c] / 255.0;
  }
  return out.to(dtype);
}

SoftBoneMap render_soft(const torch::Tensor& coords_in, const torch::Tensor& visible_in,
                        const KinematicChain& chain, const BoneMapSpec& spec,
                        const torch::Tensor& background) {
  if (!(spec.soft_sharpness > 0)) throw ConfigError("render_soft: sharpness must be positive");
  spec.validate(chain.num_bones());
  const bool batched = coords_in.dim() == 3;
  const auto coords = batched ? coords_in : coords_in.unsqueeze(0);
  TORCH_CHECK(coords.size(1) == static_cast<long>(chain.num_joints()) && coords.size(2) == 2,
              "render_soft: coords must be [B, J, 2]");
  const long b = coords.size(0);
  const auto opts = coords.options();
  torch::Tensor visible;
  if (visible_in.defined()) {
    visible = (visible_in.dim() == 1 ? visible_in.unsqueeze(0) : visible_in).to(torch::kBool);
    if (visible.size(0) != b) visible = visible.expand({b, visible.size(1)});
  } else {
    visible = torch::ones({b, coords.size(1)}, torch::TensorOptions().dtype(torch::kBool));
  }

  const long h = spec.height, w = spec.width;
  const auto xs = torch::arange(w, opts).view({1, 1, w});
  const auto ys = torch::arange(h, opts).view({1, h, 1});

  torch::Tensor image;
  if (background.defined()) {
    image = (background.dim() == 3 ? background.unsqueeze(0) : background).to(opts.dtype());
    TORCH_CHECK(image.size(1) == 3 && image.size(2) == h && image.size(3) == w,
                "render_soft: background must match the spec size");
    image = image.expand({b, 3, h, w});
  } else {
    image = color_tensor(spec.background, opts).view({1, 3, 1, 1}).expand({b, 3, h, w});
  }
  auto transmit = torch::ones({b, h, w}, opts);
  const double radius2 = 0.25 * spec.bone_width * spec.bone_width;

  for (std::size_t k = 0; k < chain.num_bones(); ++k) {
    const Bone& bone = chain.bones()[k];
    const auto p1 = coords.select(1, bone.parent);  // [B, 2]
    const auto p2 = coords.select(1, bone.child);
    const auto d = p2 - p1;
    const auto dx = d.select(1, 0).view({b, 1, 1});
    const auto dy = d.select(1, 1).view({b, 1, 1});
    const auto len2 = (dx * dx + dy * dy);
    const auto valid = (len2 > 1e-8) & visible.select(1, bone.parent).view({b, 1, 1}) &
                       visible.select(1, bone.child).view({b, 1, 1});
    // Keep the degenerate branch finite so gradients stay clean.
    const auto safe_len2 = torch::where(valid, len2, torch::ones_like(len2));
    const auto mid = 0.5 * (p1 + p2);
    const auto rx = xs - mid.select(1, 0).view({b, 1, 1});
    const auto ry = ys - mid.select(1, 1).view({b, 1, 1});
    const auto along = rx * dx + ry * dy;   // |r| |d| cos
    const auto across = rx * dy - ry * dx;  // |r| |d| sin
    const auto q = across * across / (radius2 * safe_len2) +
                   4.0 * along * along / (safe_len2 * safe_len2);
    const auto alpha = torch::sigmoid(spec.soft_sharpness * (1.0 - q)) * valid.to(opts.dtype());
    const auto colour = color_tensor(spec.palette[k], opts).view({1, 3, 1, 1});
    const auto a = alpha.unsqueeze(1);
    image = a * colour + (1.0 - a) * image;
    transmit = transmit * (1.0 - alpha);
  }
  return {image, 1.0 - transmit};
}

torch::Tensor pose_to_tensor(const Pose2D& pose, torch::Dtype dtype) {
  auto t = torch::empty({static_cast<long>(pose.size()), 2}, torch::kFloat64);
  auto a = t.accessor<double, 2>();
  for (std::size_t j = 0; j < pose.size(); ++j) {
    a[static_cast<long>(j)][0] = pose.coords[j].x();
    a[static_cast<long>(j)][1] = pose.coords[j].y();
  }
  return t.to(dtype);
}

torch::Tensor visibility_to_tensor(const Pose2D& pose) {
  auto t = torch::empty({static_cast<long>(pose.size())}, torch::kBool);
  for (std::size_t j = 0; j < pose.size(); ++j) t[static_cast<long>(j)] = static_cast<bool>(pose.visible[j]);
  return t;
}

Pose2D tensor_to_pose(const torch::Tensor& coords, const torch::Tensor& visible) {
  const auto c = coords.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  TORCH_CHECK(c.dim() == 2 && c.size(1) == 2, "tensor_to_pose: expected [J, 2]");
  Pose2D p(static_cast<std::size_t>(c.size(0)));
  auto a = c.accessor<double, 2>();
  for (long j = 0; j < c.size(0); ++j) p.coords[static_cast<std::size_t>(j)] = Vec2(a[j][0], a[j][1]);
  if (visible.defined()) {
    const auto v = visible.to(torch::kCPU, torch::kBool);
    for (long j = 0; j < c.size(0); ++j) p.visible[static_cast<std::size_t>(j)] = v[j].item<bool>();
  }
  return p;
}

}  // namespace napa
