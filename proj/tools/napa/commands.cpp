#include "commands.hpp"

#include "napa/annotation.hpp"
#include "napa/annotation_server.hpp"
#include "napa/bonemap.hpp"
#include "napa/data.hpp"
#include "napa/error.hpp"
#include "napa/image_io.hpp"
#include "napa/pipeline.hpp"
#include "napa/report.hpp"
#include "napa/synth.hpp"
#include "napa/trainer.hpp"

#include <torch/torch.h>

#include <csignal>
#include <fstream>
#include <iostream>

namespace napa::cli {

using nlohmann::json;

namespace {

json read_config(const fs::path& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

std::string abs_string(const fs::path& p) { return p.empty() ? "" : fs::absolute(p).lexically_normal().string(); }

// run.json next to the outputs: what went in, under which config.
void write_sidecar(const fs::path& dir, const std::string& command, const Common& c, json inputs,
                   const json& config) {
  inputs["manifest"] = abs_string(c.manifest);
  inputs["config_file"] = abs_string(c.config);
  const json side = {{"command", command},
                     {"seed", c.seed},
                     {"inputs", inputs},
                     {"config", config},
                     {"config_hash", config_hash(config)}};
  std::ofstream(dir / "run.json") << side.dump(2) << '\n';
}

std::vector<fs::path> list_images(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw ConfigError("no such image or directory: " + input.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(input)) {
    auto ext = e.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path checkpoint_dir(const fs::path& checkpoint, const std::string& style) {
  if (style.empty()) return checkpoint;
  const fs::path sub = checkpoint / style;
  if (!fs::exists(sub / "metadata.json")) throw ConfigError("checkpoint has no model for style '" + style + "'");
  return sub;
}

// Per-style training writes one checkpoint per style under <out>/<style_id>.
std::vector<fs::path> expand_checkpoints(const fs::path& dir) {
  if (fs::exists(dir / "metadata.json")) return {dir};
  std::vector<fs::path> out;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (fs::exists(e.path() / "metadata.json")) out.push_back(e.path());
  }
  if (out.empty()) throw Error("not a checkpoint directory: " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void stylize(const Common& c, const StylizeArgs& a) {
  const fs::path out = require_out(c);
  const fs::path ckpt = checkpoint_dir(a.checkpoint, a.style);
  Pipeline pipeline = Pipeline::load(ckpt);
  const int size = pipeline.config().image_size;
  const auto inputs = list_images(a.input);
  if (inputs.empty()) throw ConfigError("no images in " + a.input.string());

  json written = json::array();
  for (const auto& path : inputs) {
    const auto img = load_image(path);
    const int h = static_cast<int>(img.size(1)), w = static_cast<int>(img.size(2));
    auto x = (h == size && w == size) ? img : resize_image(img, size, size);
    auto y = pipeline.stylize(x.unsqueeze(0)).squeeze(0).clamp(0.0, 1.0);
    if (h != size || w != size) y = resize_image(y, h, w);
    const fs::path dst = out / (path.stem().string() + ".png");
    save_png(dst, y);
    written.push_back(dst.filename().string());
  }
  write_sidecar(out, "stylize", c,
                {{"checkpoint", abs_string(ckpt)}, {"input", abs_string(a.input)}, {"style", a.style},
                 {"outputs", written}},
                pipeline.config().to_json());
  std::cout << "stylized " << inputs.size() << " image(s) into " << out.string() << '\n';
}

void render_bonemap(const Common& c) {
  if (c.manifest.empty()) throw ConfigError("--manifest is required");
  const fs::path out = require_out(c);
  const json cfg = read_config(c.config);
  const BoneMapSpec base = cfg.empty() ? BoneMapSpec{} : BoneMapSpec::from_json(cfg.value("bonemap", cfg));
  const auto records = load_manifest(c.manifest);
  for (const auto& r : records) {
    BoneMapSpec spec = base;
    if (r.width && r.height) {
      spec.width = *r.width;
      spec.height = *r.height;
    } else {
      const auto img = load_image(resolve_image(c.manifest, r));
      spec.height = static_cast<int>(img.size(1));
      spec.width = static_cast<int>(img.size(2));
    }
    save_png(out / (r.image_id + ".png"), render_hard(r.keypoints, KinematicChain::standard(), spec));
  }
  std::ofstream(out / "bonemap_spec.json") << base.to_json().dump(2) << '\n';
  write_sidecar(out, "render-bonemap", c, {{"images", records.size()}}, base.to_json());
  std::cout << "rendered " << records.size() << " bone map(s) into " << out.string() << '\n';
}

// Config: {"pipeline": {...}, "manifest", "styles", "per_style": bool,
//          "stages": [StageConfig, ...]}. Paths are relative to the config file.
void train(const Common& c, const TrainArgs& a) {
  const fs::path out = require_out(c);
  json cfg = read_config(c.config);
  const fs::path base = c.config.empty() ? fs::current_path() : fs::absolute(c.config).parent_path();
  auto path_from = [&](const fs::path& flag, const char* key) -> fs::path {
    if (!flag.empty()) return flag;
    if (cfg.contains(key)) return base / cfg[key].get<std::string>();
    return {};
  };
  const fs::path manifest = path_from(c.manifest, "manifest");
  const fs::path styles_dir = path_from(a.styles, "styles");
  if (manifest.empty()) throw ConfigError("no manifest (--manifest or \"manifest\" in the config)");

  std::vector<StageConfig> stages;
  if (a.stage) {
    StageConfig s = StageConfig::preset(*a.stage);
    if (cfg.contains("stages")) {
      for (const auto& j : cfg["stages"])
        if (j.value("stage", 0) == *a.stage) s = StageConfig::from_json(j);
    }
    stages.push_back(s);
  } else if (cfg.contains("stages")) {
    for (const auto& j : cfg["stages"]) stages.push_back(StageConfig::from_json(j));
  } else {
    stages = {StageConfig::preset(1), StageConfig::preset(2)};
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].seed = c.seed + 7919ull * (i + 1);
    stages[i].log_path = (out / ("train_stage" + std::to_string(stages[i].stage) + ".jsonl")).string();
  }

  torch::manual_seed(c.seed);
  PipelineConfig pcfg = PipelineConfig::from_json(cfg.value("pipeline", json::object()));
  pcfg.seed = c.seed;
  std::optional<Pipeline> pipeline;
  if (!a.resume.empty()) {
    pipeline = Pipeline::load(a.resume);
    pcfg = pipeline->config();
  }
  const auto records = load_manifest(manifest);
  TrainingData data;
  data.samples = load_samples(manifest, records, pcfg.image_size);
  if (!styles_dir.empty()) data.styles = StylePool::from_directory(styles_dir, pcfg.image_size, c.seed);

  json stage_json = json::array();
  for (const auto& s : stages) stage_json.push_back(s.to_json());
  const json effective = {{"pipeline", pcfg.to_json()}, {"stages", stage_json}, {"per_style", cfg.value("per_style", false)}};
  const json inputs = {{"manifest", abs_string(manifest)}, {"styles", abs_string(styles_dir)}, {"resume", abs_string(a.resume)}};
  const json extra = {{"config_hash", config_hash(effective)}, {"seed", c.seed}};

  if (cfg.value("per_style", false)) {
    if (stages.size() != 2 || stages[0].stage != 1 || stages[1].stage != 2) {
      throw ConfigError("per_style training runs exactly stages 1 and 2");
    }
    auto models = train_per_style(pcfg, data.styles, data.samples, stages[0], stages[1]);
    for (auto& m : models) m.pipeline.save(out / m.style_id, extra);
    std::cout << "trained " << models.size() << " per-style model(s) into " << out.string() << '\n';
  } else {
    if (!pipeline) pipeline.emplace(pcfg);
    for (const auto& s : stages) {
      const auto result = run_stage(*pipeline, s, data);
      std::cout << "stage " << s.stage << ": " << result.steps_run << " step(s)";
      if (result.last_pckh) std::cout << ", training PCKh " << *result.last_pckh;
      std::cout << '\n';
    }
    pipeline->save(out, extra);
  }
  write_sidecar(out, "train", c, inputs, effective);
}

void evaluate(const Common& c, const EvaluateArgs& a, const std::string& command) {
  if (c.manifest.empty()) throw ConfigError("--manifest is required");
  if (a.checkpoints.empty() == a.predictions.empty()) {
    throw ConfigError("give either --checkpoint or --predictions (one or more)");
  }
  const fs::path out = require_out(c);
  torch::manual_seed(c.seed);
  const auto records = load_manifest(c.manifest);

  std::vector<std::vector<Prediction>> per_model;
  json sources = json::array();
  for (const auto& ckpt : a.checkpoints) {
    for (const auto& dir : expand_checkpoints(ckpt)) {
      Pipeline p = Pipeline::load(dir);
      per_model.push_back(predict_records(p, c.manifest, records, a.depth));
      sources.push_back(abs_string(dir));
    }
  }
  for (const auto& file : a.predictions) {
    per_model.push_back(load_predictions(file));
    sources.push_back(abs_string(file));
  }
  const auto preds = per_model.size() == 1 ? per_model.front() : average_predictions(per_model);
  EvalReport report = evaluate_predictions(preds, records, a.threshold);
  report.metadata = {{"command", command},
                     {"sources", sources},
                     {"models", per_model.size()},
                     {"manifest", abs_string(c.manifest)},
                     {"threshold_ratio", a.threshold}};

  const std::string label = a.label.empty() ? (per_model.size() > 1 ? "ensemble" : "model") : a.label;
  const std::string table = report.to_table(label);
  std::ofstream(out / "report.json") << report.to_json().dump(2) << '\n';
  std::ofstream(out / "report.txt") << table;
  save_predictions(out / "predictions.jsonl", preds);
  write_sidecar(out, command, c, {{"sources", sources}},
                {{"threshold_ratio", a.threshold}, {"depth", a.depth}, {"models", per_model.size()}});
  std::cout << table;
}

void synth(const Common& c, const SynthArgs& a) {
  const fs::path out = require_out(c);
  if (a.count <= 0 || a.size < 16) throw ConfigError("--count must be positive and --size at least 16");
  SynthOptions o;
  const json cfg = read_config(c.config);
  if (cfg.contains("bonemap")) o.spec = BoneMapSpec::from_json(cfg["bonemap"]);
  o.count = static_cast<std::size_t>(a.count);
  o.seed = c.seed;
  o.noise_background = a.noise_background;
  o.spec.bone_width = a.bone_width > 0 ? a.bone_width : o.spec.bone_width * a.size / o.spec.width;
  o.spec.width = o.spec.height = a.size;
  o.figure_scale = cfg.value("figure_scale", o.figure_scale);
  const fs::path manifest = write_synth_dataset(out, o);
  std::ofstream(out / "bonemap_spec.json") << o.spec.to_json().dump(2) << '\n';
  write_sidecar(out, "synth", c, {{"manifest_out", abs_string(manifest)}},
                {{"count", a.count}, {"bonemap", o.spec.to_json()}, {"noise_background", a.noise_background},
                 {"figure_scale", o.figure_scale}});
  std::cout << "wrote " << a.count << " synthetic sample(s); manifest " << manifest.string() << '\n';
}

void serve(const Common& c, const ServeArgs& a) {
  if (a.journal.empty()) throw ConfigError("--journal is required");
  AnnotationStore store(a.journal);
  if (!c.manifest.empty()) {
    const auto added = store.import_manifest(c.manifest);
    std::cout << "imported " << added << " new task(s)\n";
  }
  std::optional<Pipeline> pipeline;
  if (!a.checkpoint.empty()) pipeline = Pipeline::load(a.checkpoint);
  AnnotationServer server(store, pipeline ? &*pipeline : nullptr);
  std::cout << "serving on http://" << a.host << ':' << a.port << "/api/tasks" << std::endl;
  server.listen(a.host, a.port);
}

}  // namespace napa::cli
