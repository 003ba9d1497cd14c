#pragma once

#include "napa/bonemap.hpp"
#include "napa/data.hpp"
#include "napa/skeleton.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace napa {

struct SynthOptions {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  BoneMapSpec spec;
  bool noise_background = false;
  // Fraction of the shorter image side spanned by an upright figure.
  double figure_scale = 0.8;
  AngleLimitTable limits = AngleLimitTable::defaults(KinematicChain::standard());
};

struct SynthSample {
  SampleRecord record;
  Pose3D pose;  // u, v in pixels, z relative to the pelvis
  BoneMap image;
};

// Random articulated pose that satisfies `limits`, in pixel units of a
// spec.width x spec.height image with every joint at least one bone width
// from the border.
Pose3D sample_pose(std::mt19937_64& rng, const BoneMapSpec& spec, double figure_scale,
                   const AngleLimitTable& limits);

// Images are render_hard of the exact labels. Ids are synth_00000, ... and
// image paths images/<id>.png relative to the manifest.
std::vector<SynthSample> synth_dataset(const SynthOptions& options);

// Writes images/ and manifest.jsonl under `dir`; returns the manifest path.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir,
                                          const SynthOptions& options);

}  // namespace napa
