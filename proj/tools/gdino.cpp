// Copyright 2026 The gdino Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry points: data generation, train, eval, infer, ablate.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gdino/image_io.hpp"
#include "gdino/runtime.hpp"
#include "gdino/synth.hpp"

namespace {

using nlohmann::json;
namespace rt = gdino::runtime;

std::vector<gdino::synth::Category> parse_pairs(const std::string& list) {
  std::vector<gdino::synth::Category> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream words(item);
    gdino::synth::Category c;
    if (!(words >> c.color >> c.shape)) throw gdino::Error("held-out pair '" + item + "' is not 'color shape'");
    out.push_back(c);
  }
  return out;
}

void print_json(const json& j, const std::string& out_path) {
  std::cout << j.dump(2) << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw gdino::Error("cannot write " + out_path);
    out << j.dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set grounding detector on synthetic shapes"};
  app.require_subcommand(1);

  // gen-data
  gdino::synth::BuildConfig build;
  std::string out_dir, held_out;
  bool no_held_out = false;
  auto* gen = app.add_subcommand("gen-data", "Generate the train / val / test_open splits");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", build.seed, "Base seed");
  gen->add_option("--image-size", build.image_size, "Image side in pixels");
  gen->add_option("--train", build.train_scenes, "Training scenes");
  gen->add_option("--val", build.val_scenes, "Validation scenes");
  gen->add_option("--test", build.test_scenes, "Held-out (test_open) scenes");
  gen->add_option("--min-objects", build.min_objects, "Fewest objects per scene");
  gen->add_option("--max-objects", build.max_objects, "Most objects per scene (<= 6)");
  gen->add_option("--held-out", held_out, "Comma-separated 'color shape' pairs to hold out");
  gen->add_flag("--no-held-out", no_held_out, "Hold out nothing (test_open stays empty)");

  // vocab
  std::string vocab_out;
  auto* vocab_cmd = app.add_subcommand("vocab", "Write the built-in vocabulary, one token per line");
  vocab_cmd->add_option("--out", vocab_out, "Output file")->required();

  // train
  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train from a JSON run config");
  train_cmd->add_option("--config", config_path, "Run config")->required()->check(CLI::ExistingFile);

  // eval
  std::string ckpt, split, eval_out, pooling = "max";
  bool shuffle = false, no_rec = false;
  std::uint64_t shuffle_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split directory");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split, "Split directory containing scenes.json")->required();
  eval_cmd->add_flag("--shuffle-categories", shuffle, "Permute the prompt's category order");
  eval_cmd->add_option("--shuffle-seed", shuffle_seed, "Seed of the category permutation");
  eval_cmd->add_option("--pooling", pooling, "Token-to-phrase pooling: max or mean");
  eval_cmd->add_flag("--no-rec", no_rec, "Skip the referring-expression pass");
  eval_cmd->add_option("--out", eval_out, "Also write the metrics JSON here");

  // infer
  std::string image_path, prompt, overlay;
  double threshold = 0.3;
  bool rec = false;
  auto* infer_cmd = app.add_subcommand("infer", "Detect the phrases of a prompt in one image");
  infer_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--image", image_path, "PPM (P6) image")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--prompt", prompt, "Text prompt, phrases separated by ' . '")->required();
  infer_cmd->add_option("--threshold", threshold, "Minimum phrase score");
  infer_cmd->add_flag("--rec", rec, "Return only the highest-scoring object");
  infer_cmd->add_option("--overlay", overlay, "Write a PPM with the boxes drawn");
  infer_cmd->add_option("--pooling", pooling, "Token-to-phrase pooling: max or mean");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare the full model with the four ablations");
  ablate_cmd->add_option("--config", config_path, "Base run config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      build.out_dir = out_dir;
      if (no_held_out) {
        build.held_out.clear();
      } else if (!held_out.empty()) {
        build.held_out = parse_pairs(held_out);
      }
      const auto report = gdino::synth::build_splits(build);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "wrote " << out_dir << ": " << report.train_pairs.size() << " train pairs, "
                << report.held_out.size() << " held-out pairs\n";
    } else if (vocab_cmd->parsed()) {
      gdino::text::Vocabulary::builtin().save(vocab_out);
    } else if (train_cmd->parsed()) {
      gdino::RunConfig cfg = gdino::load_run_config(config_path);
      gdino::apply_env_overrides(cfg);
      const auto summary = rt::train(cfg, [](const json& line) { std::cerr << line.dump() << '\n'; });
      std::cout << json{{"steps", summary.steps},
                        {"final_loss", summary.final_loss},
                        {"last_checkpoint", summary.last_checkpoint.string()},
                        {"best_checkpoint", summary.best_checkpoint.string()}}
                       .dump(2)
                << '\n';
    } else if (eval_cmd->parsed()) {
      const auto lm = rt::load_model(ckpt);
      const auto data = rt::load_dataset(split);
      rt::EvalOptions opt;
      opt.pooling = gdino::parse_pooling(pooling);
      opt.rec = !no_rec;
      if (shuffle) opt.shuffle_seed = shuffle_seed;
      print_json(rt::evaluate(*lm.model, lm.vocab, data, opt).to_json(), eval_out);
    } else if (infer_cmd->parsed()) {
      const auto lm = rt::load_model(ckpt);
      auto image = gdino::read_ppm(image_path);
      const auto dets = rt::infer(*lm.model, lm.vocab, image, prompt, threshold, rec, gdino::parse_pooling(pooling));
      print_json(rt::detections_to_json(dets), "");
      if (!overlay.empty()) {
        for (const auto& d : dets) gdino::draw_box(image, d.box, {1.0f, 0.0f, 1.0f});
        gdino::write_ppm(overlay, image);
      }
    } else if (ablate_cmd->parsed()) {
      gdino::RunConfig cfg = gdino::load_run_config(config_path);
      gdino::apply_env_overrides(cfg);
      const auto rows = rt::ablate(cfg, [](const std::string& msg) { std::cerr << msg << '\n'; });
      std::cout << rt::format_ablation_table(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
