#include "doctest_compat.hpp"

#include "ml_support.hpp"
#include "napa/error.hpp"
#include "napa/nets.hpp"
#include "napa/pipeline.hpp"
#include "napa/soft_render.hpp"
#include "napa/synth.hpp"

using namespace napa;

TEST_SUITE("nets") {
  TEST_CASE("parameter counts follow the formulas") {
    for (auto norm : {Normalization::instance, Normalization::batch}) {
      for (int c : {4, 8}) {
        for (int r : {1, 3}) {
          TransformNetConfig t{norm, c, r};
          TransformNet tn(t);
          CHECK(count_parameters(*tn) == transform_net_parameter_count(t));
          PoseNetConfig p;
          p.normalization = norm;
          p.channels = c;
          p.residual_blocks = r;
          p.downsample = r;
          PoseNet pn(p);
          CHECK(count_parameters(*pn) == pose_net_parameter_count(p));
          DepthNetConfig d;
          d.normalization = norm;
          d.channels = c;
          d.stages = r + 1;
          DepthNet dn(d);
          CHECK(count_parameters(*dn) == depth_net_parameter_count(d));
        }
      }
    }
    // Default stylizer with 16 channels and 3 residual blocks.
    CHECK(transform_net_parameter_count({}) == count_parameters(*TransformNet(TransformNetConfig{})));
  }

  TEST_CASE("untrained stylizer is close to the identity") {
    torch::manual_seed(0);
    TransformNet f(TransformNetConfig{Normalization::instance, 8, 2});
    f->eval();
    const auto x = 0.05 + 0.9 * torch::rand({2, 3, 16, 16});
    const auto y = f->forward(x);
    CHECK(y.sizes() == x.sizes());
    CHECK((y - x).abs().max().item<double>() < 1e-3);
    CHECK_THROWS_AS(f->forward(torch::rand({1, 3, 10, 16})), ConfigError);
  }

  TEST_CASE("instance norm is invariant to per-channel positive affine pre-scaling") {
    torch::manual_seed(1);
    TransformNet inst(TransformNetConfig{Normalization::instance, 8, 1});
    const auto x = torch::rand({4, 3, 16, 16}, torch::kFloat64);
    inst->to(torch::kFloat64);
    const auto pre = inst->first_conv(x);
    const auto a = 0.5 + torch::rand({4, pre.size(1), 1, 1}, torch::kFloat64) * 3;
    const auto b = torch::randn({4, pre.size(1), 1, 1}, torch::kFloat64);
    const auto diff = (inst->first_norm(pre) - inst->first_norm(a * pre + b)).abs().max().item<double>();
    CHECK(diff < 1e-5);

    TransformNet batch(TransformNetConfig{Normalization::batch, 8, 1});
    batch->to(torch::kFloat64);
    batch->train();
    const auto bpre = batch->first_conv(x);
    // Only the first image is rescaled: its statistics are no longer its own.
    auto scale = torch::ones({4, bpre.size(1), 1, 1}, torch::kFloat64);
    scale[0] = 3.0;
    const auto bdiff = (batch->first_norm(bpre) - batch->first_norm(scale * bpre)).abs().max().item<double>();
    CHECK(bdiff > 1e-2);
  }

  TEST_CASE("all nets stay finite on random inputs") {
    torch::manual_seed(2);
    TransformNet f(TransformNetConfig{Normalization::instance, 4, 1});
    PoseNet g(PoseNetConfig{Normalization::instance, 8, 1, 1});
    DepthNet d(DepthNetConfig{Normalization::instance, 4, 2});
    for (int i = 0; i < 100; ++i) {
      const auto x = torch::rand({1, 3, 16, 16}) * (i % 2 ? 1.0 : 50.0);
      CHECK(torch::isfinite(f->forward(x)).all().item<bool>());
      CHECK(torch::isfinite(g->forward(x)).all().item<bool>());
      CHECK(torch::isfinite(d->forward(x)).all().item<bool>());
    }
  }

  TEST_CASE("pose forward: normalised heatmaps, bounded coords, deterministic eval") {
    torch::manual_seed(3);
    PoseNet g(PoseNetConfig{Normalization::instance, 8, 2, 1});
    g->eval();
    const auto x = torch::rand({2, 3, 32, 32});
    const auto a = pose_forward(g, x), b = pose_forward(g, x);
    CHECK(a.heatmaps.size(2) == 8);
    CHECK(torch::allclose(a.heatmaps.sum({2, 3}), torch::ones({2, 18}), 0, 1e-6));
    CHECK(a.coords.min().item<double>() >= -0.5);
    CHECK(a.coords.max().item<double>() <= 31.5);
    CHECK(torch::equal(a.coords, b.coords));
    CHECK(torch::equal(a.heatmaps, b.heatmaps));
  }

  TEST_CASE("depth forward keeps (u, v) and roots the pelvis at z = 0") {
    const auto& chain = KinematicChain::standard();
    std::mt19937_64 rng(4);
    BoneMapSpec spec;
    spec.height = spec.width = 64;
    const Pose3D truth = sample_pose(rng, spec, 0.8, AngleLimitTable::defaults(chain));
    const Pose2D p2 = truth.projection();
    std::vector<Vec3> mean(kNumBones, Vec3(1, 2, 3)), stdv(kNumBones, Vec3(2, 2, 2));
    std::vector<Vec3> standardized(kNumBones);
    torch::manual_seed(4);
    for (auto& v : standardized) v = Vec3::Random();
    const Pose3D out = depth_forward(standardized, p2, mean, stdv, chain);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      CHECK(out.coords[j].x() == p2.coords[j].x());
      CHECK(out.coords[j].y() == p2.coords[j].y());
    }
    CHECK(out.coords[static_cast<std::size_t>(chain.root())].z() == 0.0);

    // Exact bone vectors reproduce the true depths.
    BoneVectors bv = bone_vectors(truth, chain);
    bv.mean = mean;
    bv.std = stdv;
    const Pose3D rec = depth_forward(standardize_bones(bv), p2, mean, stdv, chain);
    for (std::size_t j = 0; j < kNumJoints; ++j) CHECK(rec.coords[j].z() == doctest::Approx(truth.coords[j].z()));
    const auto t = bones_to_tensor(standardized, torch::kFloat64);
    const auto back = bones_from_tensor(t);
    for (std::size_t k = 0; k < kNumBones; ++k) CHECK(back[k] == standardized[k]);
  }

  TEST_CASE("reconstructor starts as a copy of the stylizer and passes gradients to keypoints") {
    Pipeline p(testing::tiny_pipeline_config(32));
    p.init_self_supervision();
    const auto& chain = KinematicChain::standard();
    std::mt19937_64 rng(6);
    const Pose2D pose = sample_pose(rng, p.config().bonemap, 0.8, AngleLimitTable::defaults(chain)).projection();
    auto coords = pose_to_tensor(pose).unsqueeze(0).set_requires_grad(true);
    const auto style = torch::rand({1, 3, 32, 32});
    p.reconstructor->eval();
    p.stylizer->eval();
    const auto out = p.reconstruct(coords, {}, style);
    const auto composite = render_soft(coords, {}, chain, p.config().bonemap, style).image;
    CHECK(out.sizes() == composite.sizes());
    CHECK(torch::equal(out, p.stylizer->forward(composite)));
    const auto g = torch::autograd::grad({out.square().mean()}, {coords})[0];
    CHECK(g.norm().item<double>() > 0.0);
    CHECK(module_hash(*p.reconstructor) == module_hash(*p.stylizer));
  }

  TEST_CASE("config JSON roundtrip and validation") {
    TransformNetConfig t{Normalization::batch, 12, 2};
    const auto t2 = TransformNetConfig::from_json(t.to_json());
    CHECK(t2.normalization == Normalization::batch);
    CHECK(t2.channels == 12);
    CHECK_THROWS_AS(normalization_from_string("layer"), ConfigError);
    const auto pc = PipelineConfig::from_json({{"image_size", 64}});
    CHECK(pc.bonemap.height == 64);
    CHECK(pc.bonemap.bone_width == doctest::Approx(9.0 * 64 / 224));
    CHECK_THROWS_AS(PipelineConfig::from_json({{"image_size", 30}}), ConfigError);
  }
}
