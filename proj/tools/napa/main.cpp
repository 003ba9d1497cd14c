#include "commands.hpp"

#include "napa/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* cmd, napa::cli::Common& c, bool manifest) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory")->required();
  if (manifest) cmd->add_option("--manifest", c.manifest, "JSON-lines manifest")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace napa::cli;
  CLI::App app{"napa: stylization-based pose training, evaluation and annotation"};
  app.require_subcommand(1);

  Common common;

  StylizeArgs st;
  auto* stylize_cmd = app.add_subcommand("stylize", "Apply a trained stylizer to images");
  add_common(stylize_cmd, common, false);
  stylize_cmd->add_option("--checkpoint", st.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  stylize_cmd->add_option("--input", st.input, "Image file or directory")->required()->check(CLI::ExistingPath);
  stylize_cmd->add_option("--style", st.style, "Style id of a per-style checkpoint");

  auto* render_cmd = app.add_subcommand("render-bonemap", "Render hard bone maps for a manifest");
  add_common(render_cmd, common, true);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Run training stages and write a checkpoint");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--styles", tr.styles, "Directory of style images")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--stage", tr.stage, "Run only this stage")->check(CLI::Range(1, 4));

  EvaluateArgs ev;
  auto add_eval = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common, true);
    cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint directory (repeatable)")->check(CLI::ExistingDirectory);
    cmd->add_option("--predictions", ev.predictions, "Prediction JSON-lines file (repeatable)")->check(CLI::ExistingFile);
    cmd->add_option("--threshold", ev.threshold, "PCKh threshold as a fraction of head size")->capture_default_str();
    cmd->add_flag("--depth", ev.depth, "Also lift predictions to 3D");
    cmd->add_option("--label", ev.label, "Row label in the text table");
    return cmd;
  };
  auto* evaluate_cmd = add_eval("evaluate", "Score predictions with PCKh");
  auto* ensemble_cmd = add_eval("ensemble", "Average several models' 2D predictions, then score");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic bone-map dataset with exact labels");
  add_common(synth_cmd, common, false);
  synth_cmd->add_option("--count", sy.count)->capture_default_str();
  synth_cmd->add_option("--size", sy.size, "Square image side in pixels")->capture_default_str();
  synth_cmd->add_option("--bone-width", sy.bone_width, "Bone width d in pixels");
  synth_cmd->add_flag("--noise-background", sy.noise_background);

  ServeArgs sv;
  Common serve_common;
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve_cmd->add_option("--manifest", serve_common.manifest, "Manifest of tasks to import")->check(CLI::ExistingFile);
  serve_cmd->add_option("--journal", sv.journal, "Annotation journal (JSON lines)")->required();
  serve_cmd->add_option("--checkpoint", sv.checkpoint, "Checkpoint for depth proposals")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--host", sv.host)->capture_default_str();
  serve_cmd->add_option("--port", sv.port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stylize_cmd) stylize(common, st);
    else if (*render_cmd) render_bonemap(common);
    else if (*train_cmd) train(common, tr);
    else if (*evaluate_cmd) evaluate(common, ev, "evaluate");
    else if (*ensemble_cmd) evaluate(common, ev, "ensemble");
    else if (*synth_cmd) synth(common, sy);
    else if (*serve_cmd) serve(serve_common, sv);
  } catch (const napa::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const napa::PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
