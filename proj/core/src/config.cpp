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

#include "gdino/config.hpp"

#include <cstdlib>
#include <fstream>

#include "gdino/tensor.hpp"

namespace gdino {

using nlohmann::json;

LossConfig LossConfig::preset(const std::string& name) {
  LossConfig c;
  if (name == "paper-prose") return c;
  if (name == "paper-table") {
    c.match_class = 1.0;
    c.loss_class = 2.0;
    return c;
  }
  throw Error("unknown loss preset '" + name + "'");
}

ModelConfig paper_scale_model() {
  ModelConfig m;
  m.d_model = 256;
  m.ffn_dim = 2048;
  m.enhancer_layers = 6;
  m.decoder_layers = 6;
  m.num_queries = 900;
  m.text_ffn_dim = 1024;
  return m;
}

json to_json(const ModelConfig& c) {
  return json{{"image_size", c.image_size},
              {"d_model", c.d_model},
              {"heads", c.heads},
              {"ffn_dim", c.ffn_dim},
              {"enhancer_layers", c.enhancer_layers},
              {"decoder_layers", c.decoder_layers},
              {"num_queries", c.num_queries},
              {"points", c.points},
              {"text_layers", c.text_layers},
              {"text_heads", c.text_heads},
              {"text_ffn_dim", c.text_ffn_dim},
              {"max_text_len", c.max_text_len},
              {"stem_width", c.stem_width},
              {"backbone_widths", c.backbone_widths},
              {"deformable_text_to_image", c.deformable_text_to_image}};
}

namespace {

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<V>();
}

void check_known(const json& j, std::initializer_list<const char*> keys, const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw Error(std::string("unknown config key '") + it.key() + "' in " + section);
  }
}

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  check_known(j,
              {"image_size", "d_model", "heads", "ffn_dim", "enhancer_layers", "decoder_layers", "num_queries",
               "points", "text_layers", "text_heads", "text_ffn_dim", "max_text_len", "stem_width",
               "backbone_widths", "deformable_text_to_image", "preset"},
              "model");
  ModelConfig c;
  if (j.value("preset", std::string()) == "paper-scale") c = paper_scale_model();
  read(j, "image_size", c.image_size);
  read(j, "d_model", c.d_model);
  read(j, "heads", c.heads);
  read(j, "ffn_dim", c.ffn_dim);
  read(j, "enhancer_layers", c.enhancer_layers);
  read(j, "decoder_layers", c.decoder_layers);
  read(j, "num_queries", c.num_queries);
  read(j, "points", c.points);
  read(j, "text_layers", c.text_layers);
  read(j, "text_heads", c.text_heads);
  read(j, "text_ffn_dim", c.text_ffn_dim);
  read(j, "max_text_len", c.max_text_len);
  read(j, "stem_width", c.stem_width);
  read(j, "backbone_widths", c.backbone_widths);
  read(j, "deformable_text_to_image", c.deformable_text_to_image);
  if (c.backbone_widths.size() != 4) throw Error("model.backbone_widths must list 4 stage widths");
  if (c.d_model % c.heads != 0 || c.d_model % c.text_heads != 0) {
    throw Error("model.d_model must be divisible by heads and text_heads");
  }
  if (c.d_model % 4 != 0) throw Error("model.d_model must be divisible by 4");
  if (c.image_size % 32 != 0) throw Error("model.image_size must be divisible by 32");
  if (c.max_text_len > 256) throw Error("model.max_text_len is at most 256");
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["model"] = to_json(c.model);
  j["loss"] = json{{"match_class", c.loss.match_class}, {"match_l1", c.loss.match_l1},
                   {"match_giou", c.loss.match_giou},   {"loss_class", c.loss.loss_class},
                   {"loss_l1", c.loss.loss_l1},         {"loss_giou", c.loss.loss_giou},
                   {"focal_alpha", c.loss.focal_alpha}, {"focal_gamma", c.loss.focal_gamma}};
  j["optimizer"] = json{{"lr", c.optimizer.lr},
                        {"weight_decay", c.optimizer.weight_decay},
                        {"clip_max_norm", c.optimizer.clip_max_norm},
                        {"backbone_lr_mult", c.optimizer.backbone_lr_mult},
                        {"beta1", c.optimizer.beta1},
                        {"beta2", c.optimizer.beta2},
                        {"eps", c.optimizer.eps},
                        {"warmup_steps", c.optimizer.warmup_steps},
                        {"steps", c.optimizer.steps},
                        {"batch_size", c.optimizer.batch_size},
                        {"eval_every", c.optimizer.eval_every},
                        {"log_every", c.optimizer.log_every}};
  j["data"] = json{{"train_dir", c.data.train_dir},
                   {"val_dir", c.data.val_dir},
                   {"test_open_dir", c.data.test_open_dir},
                   {"output_dir", c.data.output_dir},
                   {"vocab_path", c.data.vocab_path},
                   {"max_prompt_categories", c.data.max_prompt_categories},
                   {"max_train_scenes", c.data.max_train_scenes},
                   {"max_eval_scenes", c.data.max_eval_scenes}};
  j["eval"] = json{{"phrase_pooling", c.eval.phrase_pooling}, {"iou_threshold", c.eval.iou_threshold}};
  j["ablations"] = json{{"no_encoder_fusion", c.ablations.no_encoder_fusion},
                        {"static_query_selection", c.ablations.static_query_selection},
                        {"no_text_cross_attention", c.ablations.no_text_cross_attention},
                        {"word_level_prompt", c.ablations.word_level_prompt}};
  j["seed"] = c.seed;
  j["ablation_seeds"] = c.ablation_seeds;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_known(j, {"model", "loss", "optimizer", "data", "eval", "ablations", "seed", "ablation_seeds"}, "config");
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("loss")) {
    const json& l = j["loss"];
    check_known(l,
                {"preset", "match_class", "match_l1", "match_giou", "loss_class", "loss_l1", "loss_giou",
                 "focal_alpha", "focal_gamma"},
                "loss");
    if (l.contains("preset")) c.loss = LossConfig::preset(l["preset"].get<std::string>());
    read(l, "match_class", c.loss.match_class);
    read(l, "match_l1", c.loss.match_l1);
    read(l, "match_giou", c.loss.match_giou);
    read(l, "loss_class", c.loss.loss_class);
    read(l, "loss_l1", c.loss.loss_l1);
    read(l, "loss_giou", c.loss.loss_giou);
    read(l, "focal_alpha", c.loss.focal_alpha);
    read(l, "focal_gamma", c.loss.focal_gamma);
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_known(o,
                {"lr", "weight_decay", "clip_max_norm", "backbone_lr_mult", "beta1", "beta2", "eps", "warmup_steps",
                 "steps", "batch_size", "eval_every", "log_every"},
                "optimizer");
    read(o, "lr", c.optimizer.lr);
    read(o, "weight_decay", c.optimizer.weight_decay);
    read(o, "clip_max_norm", c.optimizer.clip_max_norm);
    read(o, "backbone_lr_mult", c.optimizer.backbone_lr_mult);
    read(o, "beta1", c.optimizer.beta1);
    read(o, "beta2", c.optimizer.beta2);
    read(o, "eps", c.optimizer.eps);
    read(o, "warmup_steps", c.optimizer.warmup_steps);
    read(o, "steps", c.optimizer.steps);
    read(o, "batch_size", c.optimizer.batch_size);
    read(o, "eval_every", c.optimizer.eval_every);
    read(o, "log_every", c.optimizer.log_every);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_known(d,
                {"train_dir", "val_dir", "test_open_dir", "output_dir", "vocab_path", "max_prompt_categories",
                 "max_train_scenes", "max_eval_scenes"},
                "data");
    read(d, "train_dir", c.data.train_dir);
    read(d, "val_dir", c.data.val_dir);
    read(d, "test_open_dir", c.data.test_open_dir);
    read(d, "output_dir", c.data.output_dir);
    read(d, "vocab_path", c.data.vocab_path);
    read(d, "max_prompt_categories", c.data.max_prompt_categories);
    read(d, "max_train_scenes", c.data.max_train_scenes);
    read(d, "max_eval_scenes", c.data.max_eval_scenes);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_known(e, {"phrase_pooling", "iou_threshold"}, "eval");
    read(e, "phrase_pooling", c.eval.phrase_pooling);
    read(e, "iou_threshold", c.eval.iou_threshold);
    if (c.eval.phrase_pooling != "max" && c.eval.phrase_pooling != "mean") {
      throw Error("eval.phrase_pooling must be 'max' or 'mean'");
    }
  }
  if (j.contains("ablations")) {
    const json& a = j["ablations"];
    check_known(a, {"no_encoder_fusion", "static_query_selection", "no_text_cross_attention", "word_level_prompt"},
                "ablations");
    read(a, "no_encoder_fusion", c.ablations.no_encoder_fusion);
    read(a, "static_query_selection", c.ablations.static_query_selection);
    read(a, "no_text_cross_attention", c.ablations.no_text_cross_attention);
    read(a, "word_level_prompt", c.ablations.word_level_prompt);
  }
  read(j, "seed", c.seed);
  read(j, "ablation_seeds", c.ablation_seeds);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.data.train_dir);
  resolve(c.data.val_dir);
  resolve(c.data.test_open_dir);
  resolve(c.data.output_dir);
  resolve(c.data.vocab_path);
  return c;
}

void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config " + path.string());
  out << to_json(c).dump(2) << '\n';
}

void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("GDINO_SEED"); s != nullptr && *s != '\0') {
    try {
      c.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw Error(std::string("GDINO_SEED is not an unsigned integer: ") + s);
    }
  }
}

std::uint64_t model_config_hash(const ModelConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace gdino
