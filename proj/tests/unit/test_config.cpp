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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gdino/config.hpp"
#include "gdino/tensor.hpp"

namespace gdino {
namespace {

namespace fs = std::filesystem;

RunConfig non_default() {
  RunConfig c;
  c.model.d_model = 64;
  c.model.backbone_widths = {8, 16, 24, 32};
  c.model.deformable_text_to_image = true;
  c.loss = LossConfig::preset("paper-table");
  c.optimizer.lr = 3e-4;
  c.optimizer.warmup_steps = 7;
  c.data.train_dir = "/data/train";
  c.data.max_prompt_categories = 5;
  c.eval.phrase_pooling = "mean";
  c.ablations.word_level_prompt = true;
  c.seed = 99;
  c.ablation_seeds = {4, 5};
  return c;
}

TEST(Config, JsonRoundTrip) {
  const RunConfig c = non_default();
  EXPECT_EQ(run_config_from_json(to_json(c)), c);
  EXPECT_EQ(run_config_from_json(to_json(RunConfig{})), RunConfig{});
  EXPECT_EQ(model_config_from_json(to_json(c.model)), c.model);
}

TEST(Config, PartialJsonKeepsDefaults) {
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"model": {"num_queries": 12}, "seed": 3})"));
  EXPECT_EQ(c.model.num_queries, 12);
  EXPECT_EQ(c.model.d_model, ModelConfig{}.d_model);
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"d_modle": 64}})")), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"optimiser": {}})")), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"d_model": 30}})")), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"model": {"backbone_widths": [1, 2]}})")), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"eval": {"phrase_pooling": "min"}})")), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"loss": {"preset": "other"}})")), Error);
}

TEST(Config, Presets) {
  const auto table = LossConfig::preset("paper-table");
  EXPECT_EQ(table.match_class, 1.0);
  EXPECT_EQ(table.loss_class, 2.0);
  EXPECT_EQ(LossConfig::preset("paper-prose"), LossConfig{});
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"model": {"preset": "paper-scale"}})"));
  EXPECT_EQ(c.model, paper_scale_model());
  EXPECT_EQ(c.model.num_queries, 900);
}

TEST(Config, FileRoundTripResolvesRelativePaths) {
  const fs::path dir = fs::temp_directory_path() / "gdino_config_test";
  fs::create_directories(dir);
  RunConfig c = non_default();
  c.data.val_dir = "splits/val";
  save_run_config(c, dir / "run.json");
  const auto back = load_run_config(dir / "run.json");
  EXPECT_EQ(back.data.train_dir, "/data/train");
  EXPECT_EQ(back.data.val_dir, (dir / "splits/val").string());
  EXPECT_EQ(back.model, c.model);
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  EXPECT_THROW(load_run_config(dir / "bad.json"), Error);
  EXPECT_THROW(load_run_config(dir / "missing.json"), Error);
  fs::remove_all(dir);
}

TEST(Config, SeedEnvironmentOverride) {
  RunConfig c;
  ::setenv("GDINO_SEED", "1234", 1);
  apply_env_overrides(c);
  EXPECT_EQ(c.seed, 1234u);
  ::setenv("GDINO_SEED", "abc", 1);
  EXPECT_THROW(apply_env_overrides(c), Error);
  ::unsetenv("GDINO_SEED");
  apply_env_overrides(c);
  EXPECT_EQ(c.seed, 1234u);
}

TEST(Config, HashTracksModelSection) {
  const ModelConfig a;
  ModelConfig b;
  EXPECT_EQ(model_config_hash(a), model_config_hash(b));
  b.points = 2;
  EXPECT_NE(model_config_hash(a), model_config_hash(b));
  // FNV-1a of the canonical dump, computed independently.
  const std::string s = to_json(a).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ull;
  EXPECT_EQ(model_config_hash(a), h);
}

TEST(Config, ShippedConfigsParse) {
  const fs::path configs = fs::path(GDINO_SOURCE_DIR) / "configs";
  for (const char* name : {"overfit.json", "open_set.json", "ablate.json"}) {
    const auto c = load_run_config(configs / name);
    EXPECT_EQ(c.model, ModelConfig{}) << name;
    EXPECT_FALSE(c.data.train_dir.empty()) << name;
    EXPECT_TRUE(fs::path(c.data.output_dir).is_absolute()) << name;
  }
  EXPECT_EQ(load_run_config(configs / "ablate.json").ablation_seeds, (std::vector<std::uint64_t>{0, 1, 2}));
}

}  // namespace
}  // namespace gdino
