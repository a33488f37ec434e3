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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace gdino {

// The four arms of the fusion ablation; all false is the full model.
struct Ablations {
  bool no_encoder_fusion = false;
  bool static_query_selection = false;
  bool no_text_cross_attention = false;
  bool word_level_prompt = false;

  bool operator==(const Ablations&) const = default;
};

struct ModelConfig {
  int image_size = 64;
  int d_model = 128;
  int heads = 8;
  int ffn_dim = 1024;
  int enhancer_layers = 3;
  int decoder_layers = 3;
  int num_queries = 50;
  int points = 4;
  int text_layers = 2;
  int text_heads = 4;
  int text_ffn_dim = 256;
  int max_text_len = 256;
  int stem_width = 32;
  std::vector<int> backbone_widths = {64, 128, 256, 256};
  // Routes the text-queries-over-image fusion through deformable sampling
  // instead of dense attention.
  bool deformable_text_to_image = false;

  bool operator==(const ModelConfig&) const = default;
};

struct LossConfig {
  double match_class = 2.0;
  double match_l1 = 5.0;
  double match_giou = 2.0;
  double loss_class = 1.0;
  double loss_l1 = 5.0;
  double loss_giou = 2.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;

  // "paper-prose" (default) or "paper-table".
  static LossConfig preset(const std::string& name);
  bool operator==(const LossConfig&) const = default;
};

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double clip_max_norm = 0.1;
  double backbone_lr_mult = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 0;
  int steps = 1000;
  int batch_size = 4;
  int eval_every = 250;
  int log_every = 10;

  bool operator==(const OptimConfig&) const = default;
};

struct DataConfig {
  std::string train_dir;
  std::string val_dir;
  std::string test_open_dir;
  std::string output_dir = "run";
  std::string vocab_path;  // empty -> built-in vocabulary
  // Training prompts hold every category present in the image plus a random
  // number of absent ones, up to this many phrases in total (0 = all).
  int max_prompt_categories = 0;
  // Limit on training scenes read from train_dir (0 = all).
  int max_train_scenes = 0;
  int max_eval_scenes = 0;

  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  std::string phrase_pooling = "max";  // or "mean"
  double iou_threshold = 0.5;

  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optimizer;
  DataConfig data;
  EvalConfig eval;
  Ablations ablations;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> ablation_seeds = {0, 1, 2};

  bool operator==(const RunConfig&) const = default;
};

// Model sizes used by the paper-scale preset: 900 queries, 256-wide
// features, 2048-wide FFNs, six enhancer and six decoder layers.
ModelConfig paper_scale_model();

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& c, const std::filesystem::path& path);

// Applies the GDINO_SEED environment variable, if set.
void apply_env_overrides(RunConfig& c);

// FNV-1a over the canonical JSON dump of the model section.
std::uint64_t model_config_hash(const ModelConfig& c);

}  // namespace gdino
