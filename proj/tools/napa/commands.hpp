#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace napa::cli {

namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 0;
  fs::path config;  // optional JSON file
  fs::path out;
  fs::path manifest;
};

struct StylizeArgs {
  fs::path checkpoint;
  fs::path input;  // image file or directory
  std::string style;  // per-style subdirectory of the checkpoint, if any
};

struct TrainArgs {
  fs::path styles;
  fs::path resume;  // checkpoint to continue from
  std::optional<int> stage;  // run only this stage
};

struct EvaluateArgs {
  std::vector<fs::path> checkpoints;
  std::vector<fs::path> predictions;
  double threshold = 0.25;
  bool depth = false;
  std::string label;
};

struct SynthArgs {
  int count = 16;
  int size = 64;
  double bone_width = 0.0;  // 0: scale the 224-pixel default
  bool noise_background = false;
};

struct ServeArgs {
  fs::path journal;
  fs::path checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
};

void stylize(const Common& c, const StylizeArgs& a);
void render_bonemap(const Common& c);
void train(const Common& c, const TrainArgs& a);
// One checkpoint or prediction file is a plain evaluation; several are an
// ensemble.
void evaluate(const Common& c, const EvaluateArgs& a, const std::string& command);
void synth(const Common& c, const SynthArgs& a);
void serve(const Common& c, const ServeArgs& a);

}  // namespace napa::cli
