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

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdino/checkpoint.hpp"
#include "gdino/config.hpp"
#include "gdino/evaluation.hpp"
#include "gdino/loss.hpp"
#include "gdino/model.hpp"
#include "gdino/synth.hpp"

namespace gdino::runtime {

// A split loaded into memory with images decoded.
struct Dataset {
  synth::SplitData split;
  std::vector<Tensor<float>> images;
  std::vector<std::vector<int>> object_category;  // per scene, per object: index into split.categories
};

// Reads scenes.json and the first `max_scenes` images (0 = all).
Dataset load_dataset(const std::filesystem::path& dir, int max_scenes = 0);

// A detection prompt over a list of categories, and which category each
// phrase stands for.
struct Prompt {
  text::TokenizedPrompt tokens;
  std::vector<int> phrase_category;
  std::vector<std::vector<int>> spans;  // per phrase

  int phrase_of(int category) const;  // -1 when absent
};

// Categories are joined in the given order. Throws if a category word is not
// in the vocabulary.
Prompt build_prompt(const std::vector<synth::Category>& categories, std::span<const int> order,
                    const text::Vocabulary& vocab);

// Normalized (cx, cy, w, h) targets and phrase spans of a scene's objects.
GroundTruthSet ground_truth(const synth::Scene& scene, std::span<const int> object_category, const Prompt& prompt);

// Everything needed to run a model: parameters plus vocabulary.
struct LoadedModel {
  std::unique_ptr<GroundingModel<float>> model;
  text::Vocabulary vocab;
  nlohmann::json meta;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);
text::Vocabulary load_vocabulary(const DataConfig& data);

struct EvalOptions {
  PhrasePooling pooling = PhrasePooling::kMax;
  double iou_threshold = 0.5;
  std::optional<std::uint64_t> shuffle_seed;  // permute the prompt's category order
  int max_detections = 100;                   // per image, by score
  bool rec = true;                            // also run single-phrase REC prompts
};

struct EvalResult {
  double ap50 = 0;
  double ap = 0;  // mean over IoU 0.50:0.95
  double rec_top1 = 0;
  int rec_queries = 0;
  int images = 0;
  std::map<std::string, double> per_category;

  nlohmann::json to_json() const;
};

// Detection AP over the split's category list, plus REC top-1 over every
// object whose category occurs once in its image.
EvalResult evaluate(const GroundingModel<float>& model, const text::Vocabulary& vocab, const Dataset& data,
                    const EvalOptions& options);

struct TrainSummary {
  int steps = 0;
  double final_loss = 0;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  std::optional<double> best_val_ap50;
};

// Runs the configured training loop. Writes config.json, metrics.jsonl,
// last.ckpt and best.ckpt (best val ap50, or last without a val split) into
// data.output_dir. `progress`, if set, receives every logged JSON line.
TrainSummary train(const RunConfig& cfg, const std::function<void(const nlohmann::json&)>& progress = {});

struct InferDetection {
  std::string phrase;
  double score = 0;
  Box box;  // pixels
};

std::vector<InferDetection> infer(const GroundingModel<float>& model, const text::Vocabulary& vocab,
                                  const Tensor<float>& image, const std::string& prompt, double threshold, bool rec,
                                  PhrasePooling pooling = PhrasePooling::kMax);

nlohmann::json detections_to_json(const std::vector<InferDetection>& dets);

struct AblationArm {
  std::string name;
  Ablations flags;
};

// Full model followed by the four single-switch arms.
std::vector<AblationArm> ablation_arms();

struct AblationRow {
  std::string arm;
  std::vector<double> val_ap50, open_ap50;  // per seed
  double mean_val = 0, mean_open = 0;
};

// Trains every arm for every configured seed under output_dir/<arm>/seed<k>,
// then evaluates on val and test_open. Writes ablation.json and
// ablation.txt into output_dir.
std::vector<AblationRow> ablate(const RunConfig& base,
                                const std::function<void(const std::string&)>& progress = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace gdino::runtime
